//! Binary forest serialization. Little-endian throughout, magic
//! `GROVEF1\0`, and an FNV-1a 64 checksum of everything before the trailing
//! 8 bytes. Loaded forests carry no bag records, so they predict but do not
//! re-evaluate out-of-bag error.

use std::path::Path;

use crate::data::MemoryMode;
use crate::error::{GroveError, Result};
use crate::forest::{ForestModel, LeafPayload, TreeModel, TreeType};

const MAGIC: &[u8; 8] = b"GROVEF1\0";

fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut hash = 0xcbf2_9ce4_8422_2325u64;
    for &b in bytes {
        hash ^= b as u64;
        hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
    }
    hash
}

fn memory_mode_code(mode: MemoryMode) -> u8 {
    match mode {
        MemoryMode::RuntimeOptimized => 0,
        MemoryMode::MemoryEfficient => 1,
        MemoryMode::Gwas => 2,
    }
}

fn memory_mode_from_code(code: u8) -> Result<MemoryMode> {
    match code {
        0 => Ok(MemoryMode::RuntimeOptimized),
        1 => Ok(MemoryMode::MemoryEfficient),
        2 => Ok(MemoryMode::Gwas),
        _ => Err(GroveError::ForestFile(format!(
            "unknown memory mode code {code}"
        ))),
    }
}

struct Writer {
    buf: Vec<u8>,
}

impl Writer {
    fn u8(&mut self, v: u8) {
        self.buf.push(v);
    }
    fn u32(&mut self, v: u32) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }
    fn u64(&mut self, v: u64) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }
    fn f64(&mut self, v: f64) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }
    fn str(&mut self, s: &str) {
        self.u32(s.len() as u32);
        self.buf.extend_from_slice(s.as_bytes());
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.pos + n > self.bytes.len() {
            return Err(GroveError::ForestFile("file is truncated".into()));
        }
        let slice = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(slice)
    }
    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }
    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }
    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
    fn str(&mut self) -> Result<String> {
        let len = self.u32()? as usize;
        let bytes = self.take(len)?;
        String::from_utf8(bytes.to_vec())
            .map_err(|_| GroveError::ForestFile("name is not valid UTF-8".into()))
    }
}

/// Serialize a forest to bytes.
pub fn serialize_forest(forest: &ForestModel) -> Vec<u8> {
    let mut w = Writer {
        buf: Vec::with_capacity(1024),
    };
    w.buf.extend_from_slice(MAGIC);
    w.u8(forest.tree_type.code());
    w.u8(memory_mode_code(forest.memory_mode));
    w.u32(forest.trees.len() as u32);
    w.u32(forest.mtry as u32);
    w.u32(forest.min_node_size as u32);
    w.u64(forest.seed);
    w.u32(forest.feature_names.len() as u32);
    for name in &forest.feature_names {
        w.str(name);
    }
    w.u32(forest.classes.len() as u32);
    for class in &forest.classes {
        w.str(class);
    }
    w.u32(forest.timepoints.len() as u32);
    for &tp in &forest.timepoints {
        w.f64(tp);
    }

    for tree in &forest.trees {
        let n_nodes = tree.n_nodes();
        w.u32(n_nodes as u32);
        for node in 0..n_nodes {
            w.u32(tree.split_feature[node]);
            w.f64(tree.split_value[node]);
            w.u32(tree.left_child[node]);
            w.u32(tree.right_child[node]);
            w.u32(tree.payload_index[node]);
        }
        w.u32(tree.payloads.len() as u32);
        for payload in &tree.payloads {
            match payload {
                LeafPayload::Class(c) => w.u32(*c),
                LeafPayload::Value(v) => w.f64(*v),
                LeafPayload::Frequencies(freq) => {
                    for &f in freq {
                        w.f64(f);
                    }
                }
                LeafPayload::Curve(curve) => {
                    for &s in curve {
                        w.f64(s);
                    }
                }
            }
        }
    }
    let checksum = fnv1a64(&w.buf);
    w.u64(checksum);
    w.buf
}

fn read_tree(
    r: &mut Reader,
    forest_type: TreeType,
    n_features: usize,
    width: usize,
) -> Result<TreeModel> {
    let n_nodes = r.u32()? as usize;
    if n_nodes == 0 {
        return Err(GroveError::ForestFile("tree has no nodes".into()));
    }
    let mut tree = TreeModel::default();
    for _ in 0..n_nodes {
        tree.split_feature.push(r.u32()?);
        tree.split_value.push(r.f64()?);
        tree.left_child.push(r.u32()?);
        tree.right_child.push(r.u32()?);
        tree.payload_index.push(r.u32()?);
    }
    let n_payloads = r.u32()? as usize;
    for _ in 0..n_payloads {
        let payload = match forest_type {
            TreeType::Classification => LeafPayload::Class(r.u32()?),
            TreeType::Regression => LeafPayload::Value(r.f64()?),
            TreeType::Probability => {
                let mut freq = Vec::with_capacity(width);
                for _ in 0..width {
                    freq.push(r.f64()?);
                }
                LeafPayload::Frequencies(freq)
            }
            TreeType::Survival => {
                let mut curve = Vec::with_capacity(width);
                for _ in 0..width {
                    curve.push(r.f64()?);
                }
                LeafPayload::Curve(curve)
            }
        };
        tree.payloads.push(payload);
    }

    for node in 0..n_nodes {
        let left = tree.left_child[node] as usize;
        let right = tree.right_child[node] as usize;
        if (left == 0) != (right == 0) {
            return Err(GroveError::ForestFile(format!(
                "node {node} has exactly one child"
            )));
        }
        if left == 0 {
            let payload = tree.payload_index[node] as usize;
            if payload >= n_payloads {
                return Err(GroveError::ForestFile(format!(
                    "terminal node {node} references payload {payload} of {n_payloads}"
                )));
            }
        } else {
            if left >= n_nodes || right >= n_nodes || left <= node || right <= node {
                return Err(GroveError::ForestFile(format!(
                    "node {node} has invalid children {left}, {right}"
                )));
            }
            if tree.split_feature[node] as usize >= n_features {
                return Err(GroveError::ForestFile(format!(
                    "node {node} splits on unknown feature {}",
                    tree.split_feature[node]
                )));
            }
        }
    }
    Ok(tree)
}

/// Deserialize a forest from bytes, verifying magic, version and checksum.
pub fn deserialize_forest(bytes: &[u8]) -> Result<ForestModel> {
    if bytes.len() < MAGIC.len() + 8 {
        return Err(GroveError::ForestFile("file is too short".into()));
    }
    if bytes[..6] != MAGIC[..6] {
        return Err(GroveError::ForestFile("bad magic; not a forest file".into()));
    }
    if bytes[6..8] != MAGIC[6..8] {
        return Err(GroveError::ForestFile(format!(
            "unsupported forest file version {}",
            bytes[6] as char
        )));
    }
    let body_len = bytes.len() - 8;
    let stored = u64::from_le_bytes(bytes[body_len..].try_into().unwrap());
    let computed = fnv1a64(&bytes[..body_len]);
    if stored != computed {
        return Err(GroveError::ForestFile(
            "checksum mismatch; the file is corrupted".into(),
        ));
    }

    let mut r = Reader {
        bytes: &bytes[..body_len],
        pos: MAGIC.len(),
    };
    let tree_type = TreeType::from_code(r.u8()?)
        .map_err(|e| GroveError::ForestFile(e.to_string()))?;
    let memory_mode = memory_mode_from_code(r.u8()?)?;
    let num_trees = r.u32()? as usize;
    let mtry = r.u32()? as usize;
    let min_node_size = r.u32()? as usize;
    let seed = r.u64()?;
    let n_features = r.u32()? as usize;
    let mut feature_names = Vec::with_capacity(n_features);
    for _ in 0..n_features {
        feature_names.push(r.str()?);
    }
    let n_classes = r.u32()? as usize;
    let mut classes = Vec::with_capacity(n_classes);
    for _ in 0..n_classes {
        classes.push(r.str()?);
    }
    let n_timepoints = r.u32()? as usize;
    let mut timepoints = Vec::with_capacity(n_timepoints);
    for _ in 0..n_timepoints {
        timepoints.push(r.f64()?);
    }

    let width = match tree_type {
        TreeType::Classification | TreeType::Regression => 1,
        TreeType::Probability => n_classes,
        TreeType::Survival => n_timepoints,
    };
    let mut trees = Vec::with_capacity(num_trees);
    for _ in 0..num_trees {
        trees.push(read_tree(&mut r, tree_type, n_features, width)?);
    }
    if r.pos != body_len {
        return Err(GroveError::ForestFile(format!(
            "{} trailing byte(s) after the last tree",
            body_len - r.pos
        )));
    }
    Ok(ForestModel {
        tree_type,
        memory_mode,
        feature_names,
        classes,
        timepoints,
        mtry,
        min_node_size,
        seed,
        trees,
        bag_records: Vec::new(),
        gini_importance: None,
    })
}

pub fn write_forest_file(path: &Path, forest: &ForestModel) -> Result<()> {
    std::fs::write(path, serialize_forest(forest))
        .map_err(|e| GroveError::ForestFile(format!("cannot write {}: {e}", path.display())))
}

pub fn read_forest_file(path: &Path) -> Result<ForestModel> {
    let bytes = std::fs::read(path)
        .map_err(|e| GroveError::ForestFile(format!("cannot read {}: {e}", path.display())))?;
    deserialize_forest(&bytes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{Dataset, FeatureColumn, Response};
    use crate::forest::{grow_forest, predict_forest, GrowConfig, PredictorView};
    use crate::sampling::RngStream;

    fn small_forest(tree_type: TreeType, num_trees: usize) -> (Dataset, ForestModel) {
        let mut rng = RngStream::new(12);
        let n = 40;
        let x: Vec<f64> = (0..n).map(|_| rng.next_f64() * 4.0).collect();
        let z: Vec<f64> = (0..n).map(|_| rng.below(3) as f64).collect();
        let response = match tree_type {
            TreeType::Regression => Response::Regression {
                values: x.iter().map(|&v| v * 2.0 + 1.0).collect(),
            },
            TreeType::Survival => Response::Survival {
                times: x.iter().map(|&v| v + 1.0).collect(),
                statuses: (0..n).map(|i| (i % 3 != 0) as u8).collect(),
            },
            _ => {
                let labels: Vec<String> = x
                    .iter()
                    .map(|&v| if v > 2.0 { "hi".into() } else { "lo".into() })
                    .collect();
                Response::from_labels(&labels).unwrap()
            }
        };
        let ds = Dataset::new(
            vec![
                FeatureColumn::dense("x", x),
                FeatureColumn::dense("z", z),
            ],
            response,
        )
        .unwrap();
        let cfg = GrowConfig {
            tree_type,
            num_trees,
            seed: 33,
            ..GrowConfig::default()
        };
        let forest = grow_forest(&ds, &cfg).unwrap();
        (ds, forest)
    }

    #[test]
    fn round_trip_preserves_model_and_predictions() {
        for tree_type in [
            TreeType::Classification,
            TreeType::Regression,
            TreeType::Probability,
            TreeType::Survival,
        ] {
            let (ds, forest) = small_forest(tree_type, 5);
            let bytes = serialize_forest(&forest);
            let loaded = deserialize_forest(&bytes).unwrap();
            assert_eq!(loaded.trees, forest.trees);
            assert_eq!(loaded.tree_type, forest.tree_type);
            assert_eq!(loaded.feature_names, forest.feature_names);
            assert_eq!(loaded.classes, forest.classes);
            assert_eq!(loaded.timepoints, forest.timepoints);
            assert_eq!(loaded.mtry, forest.mtry);
            assert_eq!(loaded.min_node_size, forest.min_node_size);
            assert_eq!(loaded.seed, forest.seed);
            assert!(loaded.bag_records.is_empty());

            let view = PredictorView::from_dataset(&forest, &ds).unwrap();
            let original = predict_forest(&forest, &view).unwrap();
            let view = PredictorView::from_dataset(&loaded, &ds).unwrap();
            let reloaded = predict_forest(&loaded, &view).unwrap();
            assert_eq!(original, reloaded);
        }
    }

    #[test]
    fn serialization_is_deterministic() {
        let (_, forest) = small_forest(TreeType::Classification, 4);
        assert_eq!(serialize_forest(&forest), serialize_forest(&forest));
    }

    #[test]
    fn corrupted_byte_fails_checksum() {
        let (_, forest) = small_forest(TreeType::Classification, 2);
        let mut bytes = serialize_forest(&forest);
        let mid = bytes.len() / 2;
        bytes[mid] ^= 0xFF;
        let err = deserialize_forest(&bytes).unwrap_err();
        assert!(err.to_string().contains("checksum"), "{err}");
    }

    #[test]
    fn wrong_magic_is_rejected() {
        let (_, forest) = small_forest(TreeType::Classification, 2);
        let mut bytes = serialize_forest(&forest);
        bytes[0] = b'X';
        let err = deserialize_forest(&bytes).unwrap_err();
        assert!(err.to_string().contains("magic"), "{err}");
    }

    #[test]
    fn future_version_is_rejected() {
        let (_, forest) = small_forest(TreeType::Classification, 2);
        let mut bytes = serialize_forest(&forest);
        bytes[6] = b'2';
        let body_len = bytes.len() - 8;
        let checksum = fnv1a64(&bytes[..body_len]);
        let end = bytes.len();
        bytes[end - 8..].copy_from_slice(&checksum.to_le_bytes());
        let err = deserialize_forest(&bytes).unwrap_err();
        assert!(err.to_string().contains("version"), "{err}");
    }

    #[test]
    fn truncated_file_is_rejected() {
        let (_, forest) = small_forest(TreeType::Classification, 2);
        let bytes = serialize_forest(&forest);
        assert!(deserialize_forest(&bytes[..10]).is_err());
    }

    #[test]
    fn stump_forest_stays_under_a_kilobyte() {
        let ds = Dataset::new(
            vec![FeatureColumn::dense("x", vec![1.0, 2.0, 3.0, 4.0])],
            Response::from_labels(&[
                "a".to_string(),
                "a".to_string(),
                "b".to_string(),
                "b".to_string(),
            ])
            .unwrap(),
        )
        .unwrap();
        let cfg = GrowConfig {
            num_trees: 1,
            min_node_size: Some(100),
            ..GrowConfig::default()
        };
        let forest = grow_forest(&ds, &cfg).unwrap();
        assert_eq!(forest.trees[0].n_nodes(), 1);
        let bytes = serialize_forest(&forest);
        assert!(bytes.len() < 1024, "{} bytes", bytes.len());
    }

    #[test]
    fn file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.forest");
        let (_, forest) = small_forest(TreeType::Regression, 3);
        write_forest_file(&path, &forest).unwrap();
        let loaded = read_forest_file(&path).unwrap();
        assert_eq!(loaded.trees, forest.trees);
    }

    #[test]
    fn missing_file_is_forest_file_error() {
        let err = read_forest_file(Path::new("/nonexistent/model.forest")).unwrap_err();
        assert!(matches!(err, GroveError::ForestFile(_)));
    }
}
