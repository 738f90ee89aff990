/// Flattening of states and actions into regression feature vectors.
///
/// Q regressors take `state features ++ action features` as input.
pub trait Features {
    fn append_features(&self, out: &mut Vec<f64>);

    fn features(&self) -> Vec<f64> {
        let mut out = Vec::new();
        self.append_features(&mut out);
        out
    }
}

impl Features for f64 {
    fn append_features(&self, out: &mut Vec<f64>) {
        out.push(*self);
    }
}

impl Features for Vec<f64> {
    fn append_features(&self, out: &mut Vec<f64>) {
        out.extend_from_slice(self);
    }
}

impl<const N: usize> Features for [f64; N] {
    fn append_features(&self, out: &mut Vec<f64>) {
        out.extend_from_slice(self);
    }
}
