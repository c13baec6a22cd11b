//! CSV tables and SVG plots.
//!
//! CSV schemas:
//!
//! * sweep: `curve,w_cls,top1`. The `cls-only` curve is the flat baseline,
//!   repeated at every `w_cls` that appears in any other curve.
//! * grid: `n,k=<k1>,k=<k2>,...`, one row per `n` (ascending), one column per
//!   `k` (ascending), cells are top-1 accuracy.
//! * distinctiveness: `image,class,rank,pool_id,score`, ranks from 1.
//!
//! Floats use the shortest decimal that parses back to the same `f64`, so
//! reading a table reproduces the written values exactly.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};

pub const BASELINE_CURVE: &str = "cls-only";

#[derive(Debug, Clone, PartialEq)]
pub struct Curve {
    pub name: String,
    pub points: Vec<(f64, f64)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridCell {
    pub k: usize,
    pub n: usize,
    pub top1: f64,
}

/// Ranked scores of one candidate class for one image.
#[derive(Debug, Clone, PartialEq)]
pub struct RankedScores {
    pub image: usize,
    pub class: u32,
    pub scores: Vec<(u32, f64)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    pub ns: Vec<usize>,
    pub ks: Vec<usize>,
    /// `cells[i][j]` for `ns[i]`, `ks[j]`.
    pub cells: Vec<Vec<f64>>,
}

/// `<command>_<dataset>_<timestamp>.svg`; the timestamp honours
/// `SOURCE_DATE_EPOCH` so reruns can share a name.
pub fn plot_name(command: &str, dataset: &str) -> String {
    let now = std::env::var("SOURCE_DATE_EPOCH")
        .ok()
        .and_then(|s| s.trim().parse::<i64>().ok())
        .and_then(|t| chrono::DateTime::from_timestamp(t, 0))
        .unwrap_or_else(chrono::Utc::now);
    format!("{command}_{dataset}_{}.svg", now.format("%Y%m%dT%H%M%SZ"))
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn finish(w: csv::Writer<Vec<u8>>) -> String {
    let bytes = w.into_inner().expect("writing to memory cannot fail");
    String::from_utf8(bytes).expect("csv output is utf-8")
}

fn data_err(path: &Path, msg: impl Into<String>) -> Error {
    Error::format(path, msg)
}

pub fn sweep_csv(curves: &[Curve], baseline: f64) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["curve", "w_cls", "top1"])?;
    let mut xs = Vec::new();
    for c in curves {
        for &(x, y) in &c.points {
            w.write_record([c.name.clone(), x.to_string(), y.to_string()])?;
            xs.push(x);
        }
    }
    xs.sort_by(f64::total_cmp);
    xs.dedup();
    for x in xs {
        w.write_record([BASELINE_CURVE.to_string(), x.to_string(), baseline.to_string()])?;
    }
    Ok(finish(w))
}

/// Inverse of [`sweep_csv`]: curves in first-appearance order and the baseline.
pub fn parse_sweep_csv(path: &Path, text: &str) -> Result<(Vec<Curve>, Option<f64>)> {
    let mut r = csv::Reader::from_reader(text.as_bytes());
    let mut curves: Vec<Curve> = Vec::new();
    let mut baseline = None;
    for rec in r.deserialize::<(String, f64, f64)>() {
        let (name, x, y) = rec?;
        if name == BASELINE_CURVE {
            if baseline.is_some_and(|b| b != y) {
                return Err(data_err(path, "baseline curve is not flat"));
            }
            baseline = Some(y);
            continue;
        }
        match curves.iter_mut().find(|c| c.name == name) {
            Some(c) => c.points.push((x, y)),
            None => curves.push(Curve { name, points: vec![(x, y)] }),
        }
    }
    Ok((curves, baseline))
}

/// Writes `<out>/sweep.csv` and the plot, returning the plot path.
pub fn render_sweep(out: &Path, dataset: &str, curves: &[Curve], baseline: f64) -> Result<PathBuf> {
    write_file(&out.join("sweep.csv"), &sweep_csv(curves, baseline)?)?;
    let plot = out.join(plot_name("sweep", dataset));
    write_file(&plot, &sweep_svg(dataset, curves, baseline))?;
    Ok(plot)
}

pub fn sweep_svg(dataset: &str, curves: &[Curve], baseline: f64) -> String {
    // log1p keeps w_cls = 0 on the axis next to very large weights
    let mut series: Vec<Series> = curves
        .iter()
        .map(|c| Series {
            name: c.name.clone(),
            points: c.points.iter().map(|&(x, y)| (x.ln_1p(), y)).collect(),
            dashed: false,
        })
        .collect();
    let xs: Vec<f64> = series.iter().flat_map(|s| s.points.iter().map(|p| p.0)).collect();
    if let (Some(lo), Some(hi)) = (xs.iter().copied().reduce(f64::min), xs.iter().copied().reduce(f64::max)) {
        series.push(Series { name: BASELINE_CURVE.into(), points: vec![(lo, baseline), (hi, baseline)], dashed: true });
    }
    line_plot(&format!("{dataset}: top-1 vs w_cls"), "ln(1 + w_cls)", "top-1", &series)
}

pub fn grid_from_cells(cells: &[GridCell]) -> Result<Grid> {
    let ns: BTreeSet<usize> = cells.iter().map(|c| c.n).collect();
    let ks: BTreeSet<usize> = cells.iter().map(|c| c.k).collect();
    let mut map = BTreeMap::new();
    for c in cells {
        if map.insert((c.n, c.k), c.top1).is_some() {
            return Err(Error::Config(format!("grid cell n={}, k={} appears twice", c.n, c.k)));
        }
    }
    if map.len() != ns.len() * ks.len() {
        return Err(Error::Config(format!(
            "ragged grid: {} cells for {} n values by {} k values",
            map.len(),
            ns.len(),
            ks.len()
        )));
    }
    let ns: Vec<usize> = ns.into_iter().collect();
    let ks: Vec<usize> = ks.into_iter().collect();
    let cells = ns.iter().map(|n| ks.iter().map(|k| map[&(*n, *k)]).collect()).collect();
    Ok(Grid { ns, ks, cells })
}

pub fn grid_csv(grid: &Grid) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["n".to_string()];
    header.extend(grid.ks.iter().map(|k| format!("k={k}")));
    w.write_record(&header)?;
    for (n, row) in grid.ns.iter().zip(&grid.cells) {
        let mut rec = vec![n.to_string()];
        rec.extend(row.iter().map(f64::to_string));
        w.write_record(&rec)?;
    }
    Ok(finish(w))
}

pub fn parse_grid_csv(path: &Path, text: &str) -> Result<Grid> {
    let mut r = csv::Reader::from_reader(text.as_bytes());
    let header = r.headers()?.clone();
    if header.get(0) != Some("n") {
        return Err(data_err(path, "grid header must start with n"));
    }
    let ks = header
        .iter()
        .skip(1)
        .map(|h| {
            h.strip_prefix("k=")
                .and_then(|k| k.parse().ok())
                .ok_or_else(|| data_err(path, format!("bad grid column {h:?}")))
        })
        .collect::<Result<Vec<usize>>>()?;
    let mut ns = Vec::new();
    let mut cells = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        let parse = |s: &str| s.parse::<f64>().map_err(|e| data_err(path, format!("{s:?}: {e}")));
        ns.push(rec[0].parse().map_err(|e| data_err(path, format!("{:?}: {e}", &rec[0])))?);
        cells.push(rec.iter().skip(1).map(parse).collect::<Result<Vec<_>>>()?);
    }
    Ok(Grid { ns, ks, cells })
}

/// Writes `<out>/grid.csv`.
pub fn render_grid(out: &Path, cells: &[GridCell]) -> Result<Grid> {
    let grid = grid_from_cells(cells)?;
    write_file(&out.join("grid.csv"), &grid_csv(&grid)?)?;
    Ok(grid)
}

pub fn distinctiveness_csv(lists: &[RankedScores]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["image", "class", "rank", "pool_id", "score"])?;
    for l in lists {
        for (rank, &(pool_id, score)) in l.scores.iter().enumerate() {
            w.write_record([
                l.image.to_string(),
                l.class.to_string(),
                (rank + 1).to_string(),
                pool_id.to_string(),
                score.to_string(),
            ])?;
        }
    }
    Ok(finish(w))
}

pub fn parse_distinctiveness_csv(path: &Path, text: &str) -> Result<Vec<RankedScores>> {
    let mut r = csv::Reader::from_reader(text.as_bytes());
    let mut out: Vec<RankedScores> = Vec::new();
    for rec in r.deserialize::<(usize, u32, usize, u32, f64)>() {
        let (image, class, rank, pool_id, score) = rec?;
        let fresh = out.last().is_none_or(|l| l.image != image || l.class != class);
        if fresh {
            out.push(RankedScores { image, class, scores: Vec::new() });
        }
        let list = out.last_mut().expect("just pushed");
        if rank != list.scores.len() + 1 {
            return Err(data_err(path, format!("rank {rank} out of sequence for image {image}, class {class}")));
        }
        list.scores.push((pool_id, score));
    }
    Ok(out)
}

/// Writes `<out>/distinct.csv` and the plot, returning the plot path.
pub fn render_distinctiveness(out: &Path, dataset: &str, lists: &[RankedScores]) -> Result<PathBuf> {
    write_file(&out.join("distinct.csv"), &distinctiveness_csv(lists)?)?;
    let plot = out.join(plot_name("distinct", dataset));
    write_file(&plot, &distinctiveness_svg(dataset, lists))?;
    Ok(plot)
}

pub fn distinctiveness_svg(dataset: &str, lists: &[RankedScores]) -> String {
    let series: Vec<Series> = lists
        .iter()
        .map(|l| Series {
            name: format!("image {} / class {}", l.image, l.class),
            points: l.scores.iter().enumerate().map(|(i, s)| ((i + 1) as f64, s.1)).collect(),
            dashed: false,
        })
        .collect();
    line_plot(&format!("{dataset}: distinctiveness by rank"), "rank", "score", &series)
}

struct Series {
    name: String,
    points: Vec<(f64, f64)>,
    dashed: bool,
}

const PALETTE: [&str; 8] = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf"];

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn line_plot(title: &str, xlabel: &str, ylabel: &str, series: &[Series]) -> String {
    const W: f64 = 640.0;
    const H: f64 = 420.0;
    const L: f64 = 60.0;
    const R: f64 = 180.0;
    const T: f64 = 40.0;
    const B: f64 = 50.0;

    let all: Vec<(f64, f64)> = series.iter().flat_map(|s| s.points.iter().copied()).collect();
    let bounds = |f: fn(&(f64, f64)) -> f64| {
        let lo = all.iter().map(f).fold(f64::INFINITY, f64::min);
        let hi = all.iter().map(f).fold(f64::NEG_INFINITY, f64::max);
        match (lo.is_finite(), hi > lo) {
            (false, _) => (0.0, 1.0),
            (true, true) => (lo, hi),
            (true, false) => (lo - 0.5, lo + 0.5),
        }
    };
    let (x0, x1) = bounds(|p| p.0);
    let (y0, y1) = bounds(|p| p.1);
    let px = |x: f64| L + (x - x0) / (x1 - x0) * (W - L - R);
    let py = |y: f64| H - B - (y - y0) / (y1 - y0) * (H - T - B);

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
    let _ = writeln!(s, r#"<text x="{}" y="24" text-anchor="middle" font-size="14">{}</text>"#, W / 2.0, escape(title));
    let _ = writeln!(s, r#"<path d="M{L} {T} V{} H{}" fill="none" stroke="black"/>"#, H - B, W - R);
    for i in 0..=4 {
        let t = i as f64 / 4.0;
        let (xv, yv) = (x0 + t * (x1 - x0), y0 + t * (y1 - y0));
        let _ = writeln!(s, r#"<text x="{:.1}" y="{}" text-anchor="middle">{xv:.3}</text>"#, px(xv), H - B + 16.0);
        let _ = writeln!(s, r#"<text x="{}" y="{:.1}" text-anchor="end">{yv:.3}</text>"#, L - 6.0, py(yv) + 4.0);
    }
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#,
        (L + W - R) / 2.0,
        H - 12.0,
        escape(xlabel)
    );
    let _ = writeln!(
        s,
        r#"<text x="16" y="{}" text-anchor="middle" transform="rotate(-90 16 {})">{}</text>"#,
        H / 2.0,
        H / 2.0,
        escape(ylabel)
    );
    if all.is_empty() {
        let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="middle">no data</text>"#, (L + W - R) / 2.0, H / 2.0);
    }
    for (i, ser) in series.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let dash = if ser.dashed { r#" stroke-dasharray="6 4""# } else { "" };
        if ser.points.len() > 1 {
            let pts: Vec<String> = ser.points.iter().map(|&(x, y)| format!("{:.2},{:.2}", px(x), py(y))).collect();
            let _ = writeln!(
                s,
                r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="1.5"{dash}/>"#,
                pts.join(" ")
            );
        }
        if !ser.dashed {
            for &(x, y) in &ser.points {
                let _ = writeln!(s, r#"<circle cx="{:.2}" cy="{:.2}" r="2.5" fill="{color}"/>"#, px(x), py(y));
            }
        }
        let ly = T + 14.0 * i as f64;
        let _ = writeln!(
            s,
            r#"<line x1="{}" y1="{ly}" x2="{}" y2="{ly}" stroke="{color}" stroke-width="2"{dash}/><text x="{}" y="{}">{}</text>"#,
            W - R + 10.0,
            W - R + 30.0,
            W - R + 36.0,
            ly + 4.0,
            escape(&ser.name)
        );
    }
    s.push_str("</svg>\n");
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn p() -> &'static Path {
        Path::new("mem.csv")
    }

    #[test]
    fn ragged_grid_is_rejected() {
        let cells = [
            GridCell { k: 2, n: 5, top1: 0.1 },
            GridCell { k: 3, n: 5, top1: 0.2 },
            GridCell { k: 2, n: 10, top1: 0.3 },
        ];
        assert!(matches!(grid_from_cells(&cells), Err(Error::Config(_))));
        let one = grid_from_cells(&cells[..1]).unwrap();
        assert_eq!((one.ns, one.ks, one.cells), (vec![5], vec![2], vec![vec![0.1]]));
    }

    #[test]
    fn grid_layout_is_n_by_k() {
        let mut cells = Vec::new();
        for n in [25, 5, 15] {
            for k in [4, 2, 3] {
                cells.push(GridCell { k, n, top1: (n * 10 + k) as f64 / 1000.0 });
            }
        }
        let g = grid_from_cells(&cells).unwrap();
        assert_eq!(g.ns, [5, 15, 25]);
        assert_eq!(g.ks, [2, 3, 4]);
        assert_eq!(g.cells[1][2], 0.154);
        let text = grid_csv(&g).unwrap();
        assert!(text.starts_with("n,k=2,k=3,k=4\n5,"));
        assert_eq!(parse_grid_csv(p(), &text).unwrap(), g);
    }

    #[test]
    fn empty_and_single_point_plots() {
        let svg = distinctiveness_svg("d", &[]);
        assert!(svg.contains("no data") && svg.ends_with("</svg>\n"));
        let one = [RankedScores { image: 0, class: 1, scores: vec![(3, 0.25)] }];
        let svg = distinctiveness_svg("d", &one);
        assert_eq!(svg.matches("<circle").count(), 1);
        assert!(!svg.contains("<polyline"));
        let svg = sweep_svg("d", &[Curve { name: "selected".into(), points: vec![(0.0, 0.5)] }], 0.4);
        assert_eq!(svg.matches("<circle").count(), 1);
    }

    #[test]
    fn plot_name_uses_source_date_epoch() {
        // only this test touches the variable
        std::env::set_var("SOURCE_DATE_EPOCH", "0");
        assert_eq!(plot_name("sweep", "x"), "sweep_x_19700101T000000Z.svg");
        std::env::remove_var("SOURCE_DATE_EPOCH");
    }

    fn float() -> impl Strategy<Value = f64> {
        prop_oneof![any::<f64>().prop_filter("finite", |x| x.is_finite()), 0.0f64..1.0]
    }

    proptest! {
        #[test]
        fn sweep_csv_round_trips(
            raw in proptest::collection::vec(proptest::collection::vec((float(), float()), 1..6), 1..4),
            baseline in float(),
        ) {
            let curves: Vec<Curve> = raw
                .into_iter()
                .enumerate()
                .map(|(i, points)| Curve { name: format!("curve,{i}"), points })
                .collect();
            let text = sweep_csv(&curves, baseline).unwrap();
            let (back, b) = parse_sweep_csv(p(), &text).unwrap();
            prop_assert_eq!(back, curves);
            prop_assert_eq!(b, Some(baseline));
        }

        #[test]
        fn distinctiveness_csv_round_trips(
            raw in proptest::collection::vec(proptest::collection::vec((any::<u32>(), float()), 1..6), 0..4),
        ) {
            let lists: Vec<RankedScores> = raw
                .into_iter()
                .enumerate()
                .map(|(i, scores)| RankedScores { image: i, class: 7, scores })
                .collect();
            let text = distinctiveness_csv(&lists).unwrap();
            prop_assert_eq!(parse_distinctiveness_csv(p(), &text).unwrap(), lists);
        }

        #[test]
        fn grid_csv_round_trips(ns in 1usize..5, ks in 1usize..5, vals in proptest::collection::vec(float(), 16)) {
            let cells: Vec<GridCell> = (0..ns)
                .flat_map(|i| (0..ks).map(move |j| (i, j)))
                .map(|(i, j)| GridCell { n: 5 * (i + 1), k: j + 2, top1: vals[i * 4 + j] })
                .collect();
            let g = grid_from_cells(&cells).unwrap();
            prop_assert_eq!(parse_grid_csv(p(), &grid_csv(&g).unwrap()).unwrap(), g);
        }
    }
}
