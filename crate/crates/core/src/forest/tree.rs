//! Flat-array tree model. Nodes live in contiguous arrays indexed by node
//! id; child indices of 0 mark terminal nodes (the root is always index 0,
//! so no real child can be 0). Terminal payloads are stored out of line and
//! referenced by index.

/// Terminal-node payload; the variant matches the tree type.
#[derive(Debug, Clone, PartialEq)]
pub enum LeafPayload {
    /// Majority class index of the in-bag members.
    Class(u32),
    /// Mean response of the in-bag members.
    Value(f64),
    /// Per-class in-bag frequencies, summing to 1.
    Frequencies(Vec<f64>),
    /// Kaplan-Meier survival estimate at each forest time point.
    Curve(Vec<f64>),
}

pub(crate) const NO_PAYLOAD: u32 = u32::MAX;

/// One grown decision tree.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct TreeModel {
    pub(crate) split_feature: Vec<u32>,
    pub(crate) split_value: Vec<f64>,
    pub(crate) left_child: Vec<u32>,
    pub(crate) right_child: Vec<u32>,
    pub(crate) payload_index: Vec<u32>,
    pub(crate) payloads: Vec<LeafPayload>,
}

impl TreeModel {
    pub(crate) fn push_placeholder(&mut self) -> usize {
        let idx = self.split_feature.len();
        self.split_feature.push(0);
        self.split_value.push(0.0);
        self.left_child.push(0);
        self.right_child.push(0);
        self.payload_index.push(NO_PAYLOAD);
        idx
    }

    pub fn n_nodes(&self) -> usize {
        self.split_feature.len()
    }

    pub fn n_leaves(&self) -> usize {
        self.payloads.len()
    }

    #[inline]
    pub fn is_terminal(&self, node: usize) -> bool {
        self.left_child[node] == 0
    }

    /// Descend from the root, reading feature values through `value_at`,
    /// until a terminal node is reached. `value <= split_value` goes left.
    #[inline]
    pub fn leaf_for<F: FnMut(usize) -> f64>(&self, mut value_at: F) -> &LeafPayload {
        let mut node = 0usize;
        while !self.is_terminal(node) {
            let feature = self.split_feature[node] as usize;
            node = if value_at(feature) <= self.split_value[node] {
                self.left_child[node] as usize
            } else {
                self.right_child[node] as usize
            };
        }
        &self.payloads[self.payload_index[node] as usize]
    }

    /// Descend using a dense row of feature values in training order.
    pub fn predict_row(&self, row: &[f64]) -> &LeafPayload {
        self.leaf_for(|feature| row[feature])
    }
}
