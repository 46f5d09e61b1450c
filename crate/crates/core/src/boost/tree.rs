use serde::{Deserialize, Serialize};

/// Split feature index reserved for time. Covariate `j` is feature `j + 1`.
pub const TIME_FEATURE: usize = 0;

#[inline]
pub(crate) fn feature_value(feature: usize, t: f64, x: &[f64]) -> f64 {
    if feature == TIME_FEATURE {
        t
    } else {
        x[feature - 1]
    }
}

/// A regression tree over `(t, x)`. Values strictly below the threshold go
/// left; missing values follow `missing_goes_left`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TreeNode {
    Split {
        feature: usize,
        threshold: f64,
        missing_goes_left: bool,
        /// Training objective improvement recorded when the split was made.
        gain: f64,
        left: Box<TreeNode>,
        right: Box<TreeNode>,
    },
    Leaf {
        value: f64,
    },
}

impl TreeNode {
    pub fn leaf(value: f64) -> Self {
        TreeNode::Leaf { value }
    }

    pub fn split(
        feature: usize,
        threshold: f64,
        missing_goes_left: bool,
        gain: f64,
        left: TreeNode,
        right: TreeNode,
    ) -> Self {
        TreeNode::Split {
            feature,
            threshold,
            missing_goes_left,
            gain,
            left: Box::new(left),
            right: Box::new(right),
        }
    }

    /// Leaf value reached by `(t, x)`.
    pub fn predict(&self, t: f64, x: &[f64]) -> f64 {
        let mut node = self;
        loop {
            match node {
                TreeNode::Leaf { value } => return *value,
                TreeNode::Split {
                    feature,
                    threshold,
                    missing_goes_left,
                    left,
                    right,
                    ..
                } => {
                    let v = feature_value(*feature, t, x);
                    let go_left = if v.is_nan() {
                        *missing_goes_left
                    } else {
                        v < *threshold
                    };
                    node = if go_left { left } else { right };
                }
            }
        }
    }

    /// Calls `f(feature, threshold, gain)` for every split, preorder.
    pub fn for_each_split(&self, f: &mut impl FnMut(usize, f64, f64)) {
        if let TreeNode::Split {
            feature,
            threshold,
            gain,
            left,
            right,
            ..
        } = self
        {
            f(*feature, *threshold, *gain);
            left.for_each_split(f);
            right.for_each_split(f);
        }
    }

    pub fn depth(&self) -> usize {
        match self {
            TreeNode::Leaf { .. } => 0,
            TreeNode::Split { left, right, .. } => 1 + left.depth().max(right.depth()),
        }
    }

    pub fn n_leaves(&self) -> usize {
        match self {
            TreeNode::Leaf { .. } => 1,
            TreeNode::Split { left, right, .. } => left.n_leaves() + right.n_leaves(),
        }
    }

    pub(crate) fn check(&self, n_features: usize) -> Result<(), String> {
        match self {
            TreeNode::Leaf { value } if !value.is_finite() => {
                Err(format!("non-finite leaf value {value}"))
            }
            TreeNode::Leaf { .. } => Ok(()),
            TreeNode::Split {
                feature,
                threshold,
                left,
                right,
                ..
            } => {
                if *feature > n_features {
                    return Err(format!("split feature {feature} out of range"));
                }
                if threshold.is_nan() {
                    return Err("NaN split threshold".into());
                }
                left.check(n_features)?;
                right.check(n_features)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    // depth-2 fixture:
    //            t < 30 ?
    //         /           \
    //   x0 < 1 (miss L)   x1 < 5 (miss R)
    //    /     \            /     \
    //  0.5   -0.25        1.0     2.0
    fn fixture() -> TreeNode {
        TreeNode::split(
            TIME_FEATURE,
            30.0,
            true,
            1.0,
            TreeNode::split(1, 1.0, true, 1.0, TreeNode::leaf(0.5), TreeNode::leaf(-0.25)),
            TreeNode::split(2, 5.0, false, 1.0, TreeNode::leaf(1.0), TreeNode::leaf(2.0)),
        )
    }

    #[test]
    fn manual_traversal() {
        let tree = fixture();
        assert_eq!(tree.predict(25.0, &[0.0, 9.0]), 0.5);
        assert_eq!(tree.predict(25.0, &[1.0, 9.0]), -0.25);
        assert_eq!(tree.predict(30.0, &[0.0, 4.0]), 1.0);
        assert_eq!(tree.predict(31.0, &[0.0, 5.0]), 2.0);
        assert_eq!(tree.predict(25.0, &[f64::NAN, f64::NAN]), 0.5);
        assert_eq!(tree.predict(35.0, &[f64::NAN, f64::NAN]), 2.0);
        assert_eq!(tree.depth(), 2);
        assert_eq!(tree.n_leaves(), 4);
    }

    #[test]
    fn split_visitor_is_preorder() {
        let mut seen = Vec::new();
        fixture().for_each_split(&mut |f, thr, _| seen.push((f, thr)));
        assert_eq!(seen, vec![(0, 30.0), (1, 1.0), (2, 5.0)]);
    }
}
