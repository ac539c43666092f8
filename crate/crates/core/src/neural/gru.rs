//! A single GRU cell with hand-derived backward pass.
//!
//! Gate equations (σ = logistic, ∘ = elementwise product):
//!
//! ```text
//! z = σ(Wz x + Uz h + bz)          update gate
//! r = σ(Wr x + Ur h + br)          reset gate
//! n = tanh(Wn x + Un (r ∘ h) + bn) candidate state
//! h' = (1 − z) ∘ n + z ∘ h
//! ```

use super::params::{matvec, matvec_t, outer_acc, sigmoid, ParamVec, ParamVecBuilder};

/// Names and dimensions of one cell's blocks inside a [`ParamVec`].
#[derive(Clone, Debug)]
pub struct GruCell {
    pub prefix: String,
    pub input_dim: usize,
    pub hidden_dim: usize,
}

/// Intermediate values of one forward step, needed by the backward pass.
#[derive(Clone, Debug)]
pub struct GruStepCache {
    pub x: Vec<f64>,
    pub h_prev: Vec<f64>,
    pub z: Vec<f64>,
    pub r: Vec<f64>,
    pub n: Vec<f64>,
    pub rh: Vec<f64>,
}

impl GruCell {
    pub fn new(prefix: impl Into<String>, input_dim: usize, hidden_dim: usize) -> Self {
        GruCell { prefix: prefix.into(), input_dim, hidden_dim }
    }

    fn name(&self, part: &str) -> String {
        format!("{}.{}", self.prefix, part)
    }

    pub fn declare(&self, builder: &mut ParamVecBuilder) {
        for gate in ["wz", "wr", "wn"] {
            builder.add(self.name(gate), &[self.hidden_dim, self.input_dim]);
        }
        for gate in ["uz", "ur", "un"] {
            builder.add(self.name(gate), &[self.hidden_dim, self.hidden_dim]);
        }
        for gate in ["bz", "br", "bn"] {
            builder.add(self.name(gate), &[self.hidden_dim]);
        }
    }

    pub fn forward(&self, params: &ParamVec, x: &[f64], h_prev: &[f64]) -> (Vec<f64>, GruStepCache) {
        let h = self.hidden_dim;
        let mut az = params.block(&self.name("bz")).to_vec();
        let mut ar = params.block(&self.name("br")).to_vec();
        matvec(params.block(&self.name("wz")), h, self.input_dim, x, &mut az);
        matvec(params.block(&self.name("uz")), h, h, h_prev, &mut az);
        matvec(params.block(&self.name("wr")), h, self.input_dim, x, &mut ar);
        matvec(params.block(&self.name("ur")), h, h, h_prev, &mut ar);
        let z: Vec<f64> = az.iter().map(|&a| sigmoid(a)).collect();
        let r: Vec<f64> = ar.iter().map(|&a| sigmoid(a)).collect();

        let rh: Vec<f64> = r.iter().zip(h_prev).map(|(ri, hi)| ri * hi).collect();
        let mut an = params.block(&self.name("bn")).to_vec();
        matvec(params.block(&self.name("wn")), h, self.input_dim, x, &mut an);
        matvec(params.block(&self.name("un")), h, h, &rh, &mut an);
        let n: Vec<f64> = an.iter().map(|a| a.tanh()).collect();

        let h_new: Vec<f64> = (0..h).map(|i| (1.0 - z[i]) * n[i] + z[i] * h_prev[i]).collect();
        let cache = GruStepCache { x: x.to_vec(), h_prev: h_prev.to_vec(), z, r, n, rh };
        (h_new, cache)
    }

    /// Accumulates parameter gradients into `grads` and returns (dx, dh_prev).
    pub fn backward(
        &self,
        params: &ParamVec,
        grads: &mut ParamVec,
        cache: &GruStepCache,
        dh_new: &[f64],
    ) -> (Vec<f64>, Vec<f64>) {
        let h = self.hidden_dim;
        let GruStepCache { x, h_prev, z, r, n, rh } = cache;

        let mut dh_prev = vec![0.0; h];
        let mut dn = vec![0.0; h];
        let mut dz = vec![0.0; h];
        for i in 0..h {
            dn[i] = dh_new[i] * (1.0 - z[i]);
            dz[i] = dh_new[i] * (h_prev[i] - n[i]);
            dh_prev[i] = dh_new[i] * z[i];
        }

        // Candidate gate.
        let dan: Vec<f64> = (0..h).map(|i| dn[i] * (1.0 - n[i] * n[i])).collect();
        outer_acc(grads.block_mut(&self.name("wn")), h, self.input_dim, &dan, x);
        outer_acc(grads.block_mut(&self.name("un")), h, h, &dan, rh);
        for (g, d) in grads.block_mut(&self.name("bn")).iter_mut().zip(&dan) {
            *g += d;
        }
        let mut drh = vec![0.0; h];
        matvec_t(params.block(&self.name("un")), h, h, &dan, &mut drh);
        let mut dr = vec![0.0; h];
        for i in 0..h {
            dr[i] = drh[i] * h_prev[i];
            dh_prev[i] += drh[i] * r[i];
        }

        // Update gate.
        let daz: Vec<f64> = (0..h).map(|i| dz[i] * z[i] * (1.0 - z[i])).collect();
        outer_acc(grads.block_mut(&self.name("wz")), h, self.input_dim, &daz, x);
        outer_acc(grads.block_mut(&self.name("uz")), h, h, &daz, h_prev);
        for (g, d) in grads.block_mut(&self.name("bz")).iter_mut().zip(&daz) {
            *g += d;
        }
        matvec_t(params.block(&self.name("uz")), h, h, &daz, &mut dh_prev);

        // Reset gate.
        let dar: Vec<f64> = (0..h).map(|i| dr[i] * r[i] * (1.0 - r[i])).collect();
        outer_acc(grads.block_mut(&self.name("wr")), h, self.input_dim, &dar, x);
        outer_acc(grads.block_mut(&self.name("ur")), h, h, &dar, h_prev);
        for (g, d) in grads.block_mut(&self.name("br")).iter_mut().zip(&dar) {
            *g += d;
        }
        matvec_t(params.block(&self.name("ur")), h, h, &dar, &mut dh_prev);

        let mut dx = vec![0.0; self.input_dim];
        matvec_t(params.block(&self.name("wz")), h, self.input_dim, &daz, &mut dx);
        matvec_t(params.block(&self.name("wr")), h, self.input_dim, &dar, &mut dx);
        matvec_t(params.block(&self.name("wn")), h, self.input_dim, &dan, &mut dx);

        (dx, dh_prev)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    /// Central-difference check of the cell in isolation, loss = Σ h'².
    #[test]
    fn cell_gradients_match_finite_differences() {
        let cell = GruCell::new("cell", 3, 4);
        let mut builder = ParamVecBuilder::new();
        cell.declare(&mut builder);
        let mut params = builder.finish();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for v in params.data_mut() {
            *v = rng.random_range(-0.5..0.5);
        }
        let x: Vec<f64> = (0..3).map(|_| rng.random_range(-1.0..1.0)).collect();
        let h_prev: Vec<f64> = (0..4).map(|_| rng.random_range(-1.0..1.0)).collect();

        let loss = |p: &ParamVec| -> f64 {
            let (h, _) = cell.forward(p, &x, &h_prev);
            h.iter().map(|v| v * v).sum()
        };

        let (h, cache) = cell.forward(&params, &x, &h_prev);
        let dh: Vec<f64> = h.iter().map(|v| 2.0 * v).collect();
        let mut grads = params.zeros_like();
        cell.backward(&params, &mut grads, &cache, &dh);

        let eps = 1e-6;
        for i in 0..params.len() {
            let orig = params.data()[i];
            params.data_mut()[i] = orig + eps;
            let up = loss(&params);
            params.data_mut()[i] = orig - eps;
            let down = loss(&params);
            params.data_mut()[i] = orig;
            let numeric = (up - down) / (2.0 * eps);
            let analytic = grads.data()[i];
            let rel = (analytic - numeric).abs() / (analytic.abs() + numeric.abs()).max(1e-8);
            assert!(rel < 1e-6, "param {i}: analytic {analytic}, numeric {numeric}");
        }
    }
}
