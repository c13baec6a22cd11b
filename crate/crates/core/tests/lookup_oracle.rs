use descsel_core::matrix::EmbeddingMatrix;
use descsel_core::rng::Prng;
use descsel_core::similarity::{build_lookup, cosine, sim_matrix};
use descsel_core::{sample_probe_set, DatasetStore, DescriptionPool, Split};
use proptest::prelude::*;

fn unit_rows(rng: &mut Prng, rows: usize, dim: usize) -> EmbeddingMatrix {
    let mut data = Vec::with_capacity(rows * dim);
    for _ in 0..rows {
        let v: Vec<f64> = (0..dim).map(|_| rng.normal()).collect();
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        data.extend(v.iter().map(|x| (x / norm) as f32));
    }
    EmbeddingMatrix::new(rows, dim, data).unwrap()
}

fn random_store(seed: u64) -> DatasetStore {
    let mut rng = Prng::new(seed);
    let classes = 2 + rng.below(5) as usize;
    let dim = 2 + rng.below(15) as usize;
    let pool = 1 + rng.below(20) as usize;
    let train = 1 + rng.below(6) as usize;
    let mut labels = Vec::new();
    let mut split = Vec::new();
    for c in 0..classes {
        for i in 0..=train {
            labels.push(c as u32);
            split.push(if i < train { Split::Train } else { Split::Test });
        }
    }
    DatasetStore {
        name: "random".into(),
        prompt_template: "a photo of a {cls}".into(),
        normalized: true,
        classnames: (0..classes).map(|c| format!("c{c}")).collect(),
        cls_prompts: unit_rows(&mut rng, classes, dim),
        pool: DescriptionPool {
            texts: (0..pool).map(|p| format!("d{p}")).collect(),
            embeddings: unit_rows(&mut rng, pool, dim),
            origin_class: None,
        },
        images: unit_rows(&mut rng, labels.len(), dim),
        labels,
        split,
        pairs: None,
    }
}

fn naive_cos(u: &[f32], v: &[f32]) -> f64 {
    let mut uv = 0.0;
    let mut uu = 0.0;
    let mut vv = 0.0;
    for i in 0..u.len() {
        uv += u[i] as f64 * v[i] as f64;
        uu += u[i] as f64 * u[i] as f64;
        vv += v[i] as f64 * v[i] as f64;
    }
    uv / (uu.sqrt() * vv.sqrt())
}

#[test]
fn lookup_matches_naive_double_loop() {
    for seed in 0..1000 {
        let store = random_store(seed);
        store.validate().unwrap();
        let n = 1 + (seed as usize % store.min_train_cardinality());
        let probes = sample_probe_set(&store, n, seed).unwrap();
        let lookup = build_lookup(&store, &probes).unwrap();
        assert_eq!((lookup.classes, lookup.pool), (store.num_classes(), store.pool.len()));
        for c in 0..store.num_classes() {
            for p in 0..store.pool.len() {
                let mut total = 0.0;
                for &i in &probes.per_class[c] {
                    total += naive_cos(store.images.row(i), store.pool.embeddings.row(p));
                }
                let want = total / n as f64;
                let got = f64::from(lookup.get(c, p));
                assert!((got - want).abs() < 1e-6, "seed {seed}: {got} vs {want}");
                assert!(got.abs() <= 1.0 + 1e-6);
            }
        }
    }
}

#[test]
fn random_sim_matrix_matches_naive() {
    let mut rng = Prng::new(3);
    let a = unit_rows(&mut rng, 7, 16);
    let b = unit_rows(&mut rng, 5, 16);
    let s = sim_matrix(&a, &b).unwrap();
    for i in 0..7 {
        for j in 0..5 {
            assert!((s.get(i, j) - naive_cos(a.row(i), b.row(j))).abs() < 1e-6);
        }
    }
}

proptest! {
    #[test]
    fn similarities_are_bounded_and_symmetric(
        u in proptest::collection::vec(-10.0f32..10.0, 8),
        v in proptest::collection::vec(-10.0f32..10.0, 8),
    ) {
        prop_assume!(u.iter().any(|x| *x != 0.0) && v.iter().any(|x| *x != 0.0));
        let c = cosine(&u, &v).unwrap();
        prop_assert!(c.abs() <= 1.0 + 1e-6);
        prop_assert_eq!(c, cosine(&v, &u).unwrap());
        let a = EmbeddingMatrix::from_rows(8, [u.as_slice(), v.as_slice()]).unwrap();
        let s = sim_matrix(&a, &a).unwrap();
        prop_assert!(s.data.iter().all(|x| x.abs() <= 1.0 + 1e-6));
    }

    #[test]
    fn probe_sampling_is_a_pure_function(seed in any::<u64>(), store_seed in 0u64..50) {
        let store = random_store(store_seed);
        let n = store.min_train_cardinality();
        let a = sample_probe_set(&store, n, seed).unwrap();
        prop_assert_eq!(&a, &sample_probe_set(&store, n, seed).unwrap());
        a.validate(&store).unwrap();
    }
}
