//! Dense 64-bit tensors and named parameter collections.

use indexmap::IndexMap;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha20Rng;

use super::NnError;

/// Dense row-major tensor of `f64` values with an optional gradient buffer.
#[derive(Clone, Debug, PartialEq)]
pub struct Tensor {
    shape: Vec<usize>,
    data: Vec<f64>,
    pub requires_grad: bool,
    pub grad: Option<Vec<f64>>,
}

impl Tensor {
    pub fn new(shape: Vec<usize>, data: Vec<f64>) -> Result<Self, NnError> {
        let numel: usize = shape.iter().product();
        if shape.iter().any(|&d| d == 0) {
            return Err(NnError::BadShape {
                what: format!("zero dimension in shape {shape:?}"),
            });
        }
        if data.len() != numel {
            return Err(NnError::BadShape {
                what: format!("data length {} != product of shape {shape:?}", data.len()),
            });
        }
        Ok(Tensor { shape, data, requires_grad: false, grad: None })
    }

    pub fn zeros(shape: Vec<usize>) -> Self {
        let numel = shape.iter().product();
        Tensor { shape, data: vec![0.0; numel], requires_grad: false, grad: None }
    }

    /// Uniform(-bound, bound) entries from a dedicated stream of `rng`.
    pub fn uniform(shape: Vec<usize>, bound: f64, rng: &mut ChaCha20Rng) -> Self {
        let numel = shape.iter().product();
        let data = (0..numel).map(|_| rng.gen_range(-bound..bound)).collect();
        Tensor { shape, data, requires_grad: false, grad: None }
    }

    pub fn scalar(v: f64) -> Self {
        Tensor { shape: vec![1], data: vec![v], requires_grad: false, grad: None }
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn numel(&self) -> usize {
        self.data.len()
    }

    /// Lazily allocates the gradient buffer and returns it.
    pub fn grad_mut(&mut self) -> &mut [f64] {
        if self.grad.is_none() {
            self.grad = Some(vec![0.0; self.data.len()]);
        }
        self.grad.as_mut().unwrap()
    }

    pub fn zero_grad(&mut self) {
        if let Some(g) = self.grad.as_mut() {
            g.iter_mut().for_each(|x| *x = 0.0);
        }
    }
}

/// Ordered, named model parameters. Iteration order is insertion order,
/// which keeps initialization and serialization deterministic.
#[derive(Clone, Debug)]
pub struct ParameterSet {
    params: IndexMap<String, Tensor>,
    pub rng_seed: u64,
}

impl ParameterSet {
    pub fn new(rng_seed: u64) -> Self {
        ParameterSet { params: IndexMap::new(), rng_seed }
    }

    /// Inserts a parameter; names must be unique.
    pub fn insert(&mut self, name: &str, mut tensor: Tensor) -> Result<(), NnError> {
        if self.params.contains_key(name) {
            return Err(NnError::DuplicateParam { name: name.to_string() });
        }
        tensor.requires_grad = true;
        self.params.insert(name.to_string(), tensor);
        Ok(())
    }

    pub fn get(&self, name: &str) -> Result<&Tensor, NnError> {
        self.params.get(name).ok_or_else(|| NnError::MissingParam { name: name.to_string() })
    }

    pub fn get_mut(&mut self, name: &str) -> Result<&mut Tensor, NnError> {
        self.params.get_mut(name).ok_or_else(|| NnError::MissingParam { name: name.to_string() })
    }

    pub fn iter(&self) -> impl Iterator<Item = (&String, &Tensor)> {
        self.params.iter()
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = (&String, &mut Tensor)> {
        self.params.iter_mut()
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    pub fn zero_grads(&mut self) {
        for (_, t) in self.params.iter_mut() {
            t.zero_grad();
        }
    }

    /// Global L2 norm of all gradients.
    pub fn grad_norm(&self) -> f64 {
        let mut sq = 0.0;
        for (_, t) in self.params.iter() {
            if let Some(g) = &t.grad {
                sq += g.iter().map(|x| x * x).sum::<f64>();
            }
        }
        sq.sqrt()
    }

    /// Scales all gradients so the global norm does not exceed `max_norm`.
    pub fn clip_grad_norm(&mut self, max_norm: f64) {
        let norm = self.grad_norm();
        if norm > max_norm && norm > 0.0 {
            let scale = max_norm / norm;
            for (_, t) in self.params.iter_mut() {
                if let Some(g) = t.grad.as_mut() {
                    g.iter_mut().for_each(|x| *x *= scale);
                }
            }
        }
    }

    /// RNG seeded from the set's recorded seed; used for parameter init.
    pub fn seeded_rng(&self) -> ChaCha20Rng {
        ChaCha20Rng::seed_from_u64(self.rng_seed)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tensor_shape_mismatch_rejected() {
        assert!(Tensor::new(vec![2, 3], vec![0.0; 5]).is_err());
        assert!(Tensor::new(vec![2, 3], vec![0.0; 6]).is_ok());
    }

    #[test]
    fn duplicate_param_rejected() {
        let mut ps = ParameterSet::new(0);
        ps.insert("w", Tensor::zeros(vec![2])).unwrap();
        assert!(ps.insert("w", Tensor::zeros(vec![2])).is_err());
    }

    #[test]
    fn clip_scales_to_max_norm() {
        let mut ps = ParameterSet::new(0);
        let mut t = Tensor::zeros(vec![2]);
        t.grad = Some(vec![3.0, 4.0]);
        ps.insert("w", t).unwrap();
        ps.clip_grad_norm(1.0);
        let g = ps.get("w").unwrap().grad.as_ref().unwrap().clone();
        assert!((g[0] - 0.6).abs() < 1e-12);
        assert!((g[1] - 0.8).abs() < 1e-12);
    }

    #[test]
    fn insertion_order_is_stable() {
        let mut ps = ParameterSet::new(7);
        ps.insert("b", Tensor::zeros(vec![1])).unwrap();
        ps.insert("a", Tensor::zeros(vec![1])).unwrap();
        let names: Vec<_> = ps.iter().map(|(n, _)| n.clone()).collect();
        assert_eq!(names, vec!["b", "a"]);
    }
}
