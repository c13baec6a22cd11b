//! In-memory dataset store: classnames, classname prompts, the description
//! pool, image embeddings with labels and split tags, and an optional sparse
//! table of classname-included pair embeddings.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::EmbeddingMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
#[repr(u8)]
pub enum Split {
    Train = 0,
    Test = 1,
}

impl Split {
    pub fn from_byte(b: u8) -> Option<Self> {
        match b {
            0 => Some(Split::Train),
            1 => Some(Split::Test),
            _ => None,
        }
    }
}

/// Global pool of classname-free descriptions.
#[derive(Debug, Clone, PartialEq)]
pub struct DescriptionPool {
    pub texts: Vec<String>,
    pub embeddings: EmbeddingMatrix,
    /// Class the description was generated for, when known.
    pub origin_class: Option<Vec<u32>>,
}

impl DescriptionPool {
    pub fn len(&self) -> usize {
        self.texts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.texts.is_empty()
    }

    fn validate(&self, classnames: &[String]) -> Result<()> {
        if self.texts.len() != self.embeddings.rows() {
            return Err(Error::CountMismatch {
                what: "pool texts vs pool embeddings",
                expected: self.embeddings.rows(),
                found: self.texts.len(),
            });
        }
        let Some(origin) = &self.origin_class else {
            return Ok(());
        };
        if origin.len() != self.texts.len() {
            return Err(Error::CountMismatch {
                what: "pool origin_class",
                expected: self.texts.len(),
                found: origin.len(),
            });
        }
        let lowered: Vec<String> = classnames.iter().map(|c| c.to_lowercase()).collect();
        for (pool_id, (text, &class)) in self.texts.iter().zip(origin).enumerate() {
            let class = class as usize;
            let Some(name) = lowered.get(class) else {
                return Err(Error::LabelOutOfRange { image: pool_id, label: class as u32, classes: classnames.len() });
            };
            if !name.is_empty() && text.to_lowercase().contains(name.as_str()) {
                return Err(Error::ClassnameInDescription { pool_id, class });
            }
        }
        Ok(())
    }
}

/// Sparse `(class, description) -> embedding` table for classname-included
/// descriptions such as "{cls}, which {desc}".
#[derive(Debug, Clone, PartialEq)]
pub struct PairEmbeddingTable {
    pub template: String,
    /// Rows are synthetic stand-ins rather than encoder output.
    pub synthetic: bool,
    keys: Vec<(u32, u32)>,
    embeddings: EmbeddingMatrix,
    index: BTreeMap<(u32, u32), usize>,
}

impl PairEmbeddingTable {
    pub fn new(template: String, synthetic: bool, keys: Vec<(u32, u32)>, embeddings: EmbeddingMatrix) -> Result<Self> {
        if keys.len() != embeddings.rows() {
            return Err(Error::CountMismatch {
                what: "pair keys vs pair embeddings",
                expected: embeddings.rows(),
                found: keys.len(),
            });
        }
        let mut index = BTreeMap::new();
        for (row, &key) in keys.iter().enumerate() {
            if index.insert(key, row).is_some() {
                return Err(Error::DuplicatePairKey { class: key.0, pool_id: key.1 });
            }
        }
        Ok(Self { template, synthetic, keys, embeddings, index })
    }

    pub fn keys(&self) -> &[(u32, u32)] {
        &self.keys
    }

    pub fn embeddings(&self) -> &EmbeddingMatrix {
        &self.embeddings
    }

    pub fn len(&self) -> usize {
        self.keys.len()
    }

    pub fn is_empty(&self) -> bool {
        self.keys.is_empty()
    }

    pub fn get(&self, class: u32, pool_id: u32) -> Option<&[f32]> {
        self.index.get(&(class, pool_id)).map(|&row| self.embeddings.row(row))
    }

    /// Renders the pair text for a class name and a description.
    pub fn render(&self, classname: &str, description: &str) -> String {
        render_pair(&self.template, classname, description)
    }
}

pub fn render_pair(template: &str, classname: &str, description: &str) -> String {
    template.replace("{cls}", classname).replace("{desc}", description)
}

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetStore {
    pub name: String,
    /// Classname prompt template, e.g. "a photo of a {cls}".
    pub prompt_template: String,
    /// Whether every embedding row is required to be unit-norm.
    pub normalized: bool,
    pub classnames: Vec<String>,
    pub cls_prompts: EmbeddingMatrix,
    pub pool: DescriptionPool,
    pub images: EmbeddingMatrix,
    pub labels: Vec<u32>,
    pub split: Vec<Split>,
    pub pairs: Option<PairEmbeddingTable>,
}

impl DatasetStore {
    pub fn num_classes(&self) -> usize {
        self.classnames.len()
    }

    pub fn dim(&self) -> usize {
        self.images.dim()
    }

    /// Checks every store invariant; the first violation found is returned.
    pub fn validate(&self) -> Result<()> {
        let classes = self.num_classes();
        let dim = self.dim();
        let named = [("classname prompts", &self.cls_prompts), ("pool embeddings", &self.pool.embeddings)];
        for (_, m) in named {
            if m.dim() != dim {
                return Err(Error::DimMismatch { expected: dim, found: m.dim() });
            }
        }
        if self.cls_prompts.rows() != classes {
            return Err(Error::CountMismatch {
                what: "classname prompt embeddings",
                expected: classes,
                found: self.cls_prompts.rows(),
            });
        }
        let images = self.images.rows();
        if self.labels.len() != images {
            return Err(Error::CountMismatch { what: "labels", expected: images, found: self.labels.len() });
        }
        if self.split.len() != images {
            return Err(Error::CountMismatch { what: "split tags", expected: images, found: self.split.len() });
        }
        self.pool.validate(&self.classnames)?;

        let mut has_test = alloc::vec![false; classes];
        for (image, (&label, &split)) in self.labels.iter().zip(&self.split).enumerate() {
            if label as usize >= classes {
                return Err(Error::LabelOutOfRange { image, label, classes });
            }
            if split == Split::Test {
                has_test[label as usize] = true;
            }
        }
        if let Some(class) = has_test.iter().position(|&t| !t) {
            return Err(Error::NoTestImages { class });
        }

        if let Some(pairs) = &self.pairs {
            if pairs.embeddings.dim() != dim {
                return Err(Error::DimMismatch { expected: dim, found: pairs.embeddings.dim() });
            }
            for &(class, pool_id) in &pairs.keys {
                if class as usize >= classes || pool_id as usize >= self.pool.len() {
                    return Err(Error::InvalidPairKey { class, pool_id });
                }
            }
        }

        if self.normalized {
            self.cls_prompts.check_unit_norm("classname prompts")?;
            self.pool.embeddings.check_unit_norm("pool embeddings")?;
            self.images.check_unit_norm("images")?;
        }
        // pair rows are required to be unit-norm regardless of the flag
        if let Some(pairs) = &self.pairs {
            pairs.embeddings.check_unit_norm("pair embeddings")?;
        }
        Ok(())
    }

    /// Train image indices per class, ascending.
    pub fn train_indices_by_class(&self) -> Vec<Vec<usize>> {
        self.indices_by_class(Split::Train)
    }

    pub fn indices_by_class(&self, split: Split) -> Vec<Vec<usize>> {
        let mut out = alloc::vec![Vec::new(); self.num_classes()];
        for (i, (&label, &s)) in self.labels.iter().zip(&self.split).enumerate() {
            if s == split {
                out[label as usize].push(i);
            }
        }
        out
    }

    pub fn test_indices(&self) -> Vec<usize> {
        (0..self.images.rows()).filter(|&i| self.split[i] == Split::Test).collect()
    }

    /// Smallest number of train images over all classes, the default probe
    /// count `n`.
    pub fn min_train_cardinality(&self) -> usize {
        self.train_indices_by_class().iter().map(Vec::len).min().unwrap_or(0)
    }
}

#[cfg(test)]
pub(crate) mod fixtures {
    use super::*;
    use alloc::string::ToString;
    use alloc::vec;

    /// Two classes in 2-D, one train and one test image each.
    pub fn tiny_store() -> DatasetStore {
        let e = |v: &[f32]| EmbeddingMatrix::new(v.len() / 2, 2, v.to_vec()).unwrap();
        DatasetStore {
            name: "tiny".to_string(),
            prompt_template: "a photo of a {cls}".to_string(),
            normalized: true,
            classnames: vec!["cat".to_string(), "dog".to_string()],
            cls_prompts: e(&[1.0, 0.0, 0.0, 1.0]),
            pool: DescriptionPool {
                texts: vec!["whiskers".to_string(), "floppy ears".to_string()],
                embeddings: e(&[0.6, 0.8, 0.8, 0.6]),
                origin_class: Some(vec![0, 1]),
            },
            images: e(&[1.0, 0.0, 0.0, 1.0, 1.0, 0.0, 0.0, 1.0]),
            labels: vec![0, 1, 0, 1],
            split: vec![Split::Train, Split::Train, Split::Test, Split::Test],
            pairs: None,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::fixtures::tiny_store;
    use super::*;
    use alloc::string::ToString;
    use alloc::vec;

    #[test]
    fn tiny_store_is_valid() {
        tiny_store().validate().unwrap();
    }

    #[test]
    fn short_image_row_is_a_norm_violation() {
        let mut s = tiny_store();
        s.images = EmbeddingMatrix::new(4, 2, vec![1.0, 0.0, 0.0, 1.0, 0.5, 0.0, 0.0, 1.0]).unwrap();
        assert!(matches!(s.validate(), Err(Error::NormViolation { matrix: "images", row: 2, .. })));
        s.normalized = false;
        s.validate().unwrap();
    }

    #[test]
    fn label_out_of_range() {
        let mut s = tiny_store();
        s.labels[1] = 7;
        assert!(matches!(s.validate(), Err(Error::LabelOutOfRange { image: 1, label: 7, .. })));
    }

    #[test]
    fn class_without_test_images() {
        let mut s = tiny_store();
        s.split[3] = Split::Train;
        assert_eq!(s.validate(), Err(Error::NoTestImages { class: 1 }));
    }

    #[test]
    fn classname_in_description_is_rejected() {
        let mut s = tiny_store();
        s.pool.texts[1] = "a Dog with floppy ears".to_string();
        assert_eq!(s.validate(), Err(Error::ClassnameInDescription { pool_id: 1, class: 1 }));
        // anonymous pools are not checked
        s.pool.origin_class = None;
        s.validate().unwrap();
    }

    #[test]
    fn dim_mismatch() {
        let mut s = tiny_store();
        s.pool.embeddings = EmbeddingMatrix::new(2, 1, vec![1.0, 1.0]).unwrap();
        assert!(matches!(s.validate(), Err(Error::DimMismatch { expected: 2, found: 1 })));
    }

    #[test]
    fn pair_keys_must_be_in_range() {
        let mut s = tiny_store();
        let emb = EmbeddingMatrix::new(1, 2, vec![1.0, 0.0]).unwrap();
        s.pairs = Some(PairEmbeddingTable::new("{cls}, which {desc}".to_string(), false, vec![(0, 5)], emb).unwrap());
        assert_eq!(s.validate(), Err(Error::InvalidPairKey { class: 0, pool_id: 5 }));
    }

    #[test]
    fn pair_lookup_and_render() {
        let emb = EmbeddingMatrix::new(2, 2, vec![1.0, 0.0, 0.0, 1.0]).unwrap();
        let t =
            PairEmbeddingTable::new("{cls}, which has {desc}".to_string(), false, vec![(1, 0), (0, 1)], emb).unwrap();
        assert_eq!(t.get(0, 1), Some(&[0.0f32, 1.0][..]));
        assert_eq!(t.get(1, 1), None);
        assert_eq!(t.render("dog", "floppy ears"), "dog, which has floppy ears");
        let dup = PairEmbeddingTable::new(
            String::new(),
            false,
            vec![(0, 0), (0, 0)],
            EmbeddingMatrix::new(2, 1, vec![1.0, 1.0]).unwrap(),
        );
        assert!(matches!(dup, Err(Error::DuplicatePairKey { .. })));
    }

    #[test]
    fn indices_by_split() {
        let s = tiny_store();
        assert_eq!(s.train_indices_by_class(), vec![vec![0], vec![1]]);
        assert_eq!(s.test_indices(), vec![2, 3]);
        assert_eq!(s.min_train_cardinality(), 1);
    }
}
