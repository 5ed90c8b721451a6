//! The sparse online GP-SARSA learner.
//!
//! The Q-function has a zero-mean GP prior with the kernel from the parent
//! module. A transition (x_t, r_t, x_{t+1}) contributes the observation
//! r_t = Q(x_t) − γ·Q(x_{t+1}) + ε with iid noise of variance σ². Points
//! whose squared projection residual onto the dictionary exceeds ν become
//! representers; everything else is projected onto the dictionary span, so
//! each observation reduces to a linear functional φ = k̃(x_t) − γ·k̃(x_{t+1})
//! of the representer weights w ~ N(0, K̃⁻¹).
//!
//! The learner maintains P⁻¹ (posterior covariance of w, where
//! P = K̃ + σ⁻²Σφφᵀ) by Sherman–Morrison rank-1 updates and block
//! extensions, giving
//!
//!   mean(x) = k̃(x)ᵀ·α  with α = P⁻¹·b,  b = σ⁻²Σφ·r
//!   var(x)  = k(x,x) − k̃(x)ᵀ·(K̃⁻¹ − P⁻¹)·k̃(x) + σ²
//!
//! On single-step episodes this reproduces batch GP regression on the
//! dictionary points exactly, which is what the oracle tests pin down.

use rand::Rng;
use rand_chacha::ChaCha20Rng;

use super::{kernel, PolicyError};

#[derive(Clone, Debug, PartialEq)]
pub struct Point {
    pub summary: Vec<f64>,
    pub action: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SelectMode {
    /// Thompson-style draw from the Q posterior per executable action.
    Sample,
    /// Posterior mean argmax.
    Greedy,
}

#[derive(Clone, Copy, Debug)]
pub struct GpSarsaConfig {
    pub noise_std: f64,
    pub sparsity_threshold: f64,
    pub discount: f64,
    pub dictionary_cap: usize,
}

impl Default for GpSarsaConfig {
    fn default() -> Self {
        GpSarsaConfig {
            noise_std: 5.0,
            sparsity_threshold: 0.001,
            discount: 1.0,
            dictionary_cap: 1000,
        }
    }
}

/// Square row-major matrix sized to the live dictionary.
#[derive(Clone, Debug, Default)]
pub(crate) struct SquareMat {
    pub data: Vec<f64>,
    pub n: usize,
}

impl SquareMat {
    fn matvec(&self, x: &[f64], out: &mut [f64]) {
        let n = self.n;
        for i in 0..n {
            let row = &self.data[i * n..(i + 1) * n];
            let mut s = 0.0;
            for j in 0..n {
                s += row[j] * x[j];
            }
            out[i] = s;
        }
    }

    /// self -= (v vᵀ)/denom
    fn rank1_sub(&mut self, v: &[f64], denom: f64) {
        let n = self.n;
        for i in 0..n {
            let vi = v[i];
            if vi == 0.0 {
                continue;
            }
            let row = &mut self.data[i * n..(i + 1) * n];
            for j in 0..n {
                row[j] -= vi * v[j] / denom;
            }
        }
    }

    /// Grows by one row/column as the inverse of [[M⁻¹-block, kvec],
    /// [kvecᵀ, kxx]] given `a = M⁻¹·kvec` and the Schur complement δ.
    fn grow_inverse(&mut self, a: &[f64], delta: f64) {
        let n = self.n;
        let m = n + 1;
        let mut new = vec![0.0; m * m];
        for i in 0..n {
            for j in 0..n {
                new[i * m + j] = self.data[i * n + j] + a[i] * a[j] / delta;
            }
            new[i * m + n] = -a[i] / delta;
            new[n * m + i] = -a[i] / delta;
        }
        new[n * m + n] = 1.0 / delta;
        self.data = new;
        self.n = m;
    }
}

#[derive(Clone, Debug)]
pub struct GpSarsaPolicy {
    pub cfg: GpSarsaConfig,
    pub(crate) points: Vec<Point>,
    /// dictionary indices per action, for sparse kernel vectors
    pub(crate) by_action: Vec<Vec<usize>>,
    pub(crate) kinv: SquareMat,
    pub(crate) pinv: SquareMat,
    pub(crate) b: Vec<f64>,
    pub(crate) alpha: Vec<f64>,
    pub(crate) pending: Option<Point>,
    pub(crate) episode_active: bool,
    pub negative_variance_warnings: u64,
}

impl GpSarsaPolicy {
    pub fn new(num_actions: usize, cfg: GpSarsaConfig) -> Self {
        GpSarsaPolicy {
            cfg,
            points: Vec::new(),
            by_action: vec![Vec::new(); num_actions],
            kinv: SquareMat::default(),
            pinv: SquareMat::default(),
            b: Vec::new(),
            alpha: Vec::new(),
            pending: None,
            episode_active: false,
            negative_variance_warnings: 0,
        }
    }

    pub fn dictionary_size(&self) -> usize {
        self.points.len()
    }

    pub fn num_actions(&self) -> usize {
        self.by_action.len()
    }

    /// Kernel vector against the dictionary; nonzero only on entries
    /// whose action matches.
    fn kvec(&self, x: &Point) -> Result<Vec<f64>, PolicyError> {
        let mut k = vec![0.0; self.points.len()];
        if x.action < self.by_action.len() {
            for &i in &self.by_action[x.action] {
                k[i] = kernel(x, &self.points[i])?;
            }
        }
        Ok(k)
    }

    /// Squared projection residual of x onto the dictionary span.
    fn residual(&self, x: &Point, kv: &[f64]) -> Result<f64, PolicyError> {
        let kxx = kernel(x, x)?;
        if self.points.is_empty() {
            return Ok(kxx);
        }
        let mut a = vec![0.0; self.kinv.n];
        self.kinv.matvec(kv, &mut a);
        let proj: f64 = kv.iter().zip(&a).map(|(k, ai)| k * ai).sum();
        Ok(kxx - proj)
    }

    /// Admits x when its residual exceeds ν and the cap allows.
    fn consider_admission(&mut self, x: &Point) -> Result<(), PolicyError> {
        if self.points.len() >= self.cfg.dictionary_cap {
            return Ok(());
        }
        let kv = self.kvec(x)?;
        let delta = self.residual(x, &kv)?;
        if delta <= self.cfg.sparsity_threshold {
            return Ok(());
        }
        let kxx = kernel(x, x)?;
        if self.points.is_empty() {
            self.kinv = SquareMat { data: vec![1.0 / kxx], n: 1 };
            self.pinv = SquareMat { data: vec![1.0 / kxx], n: 1 };
        } else {
            let n = self.kinv.n;
            let mut a = vec![0.0; n];
            self.kinv.matvec(&kv, &mut a);
            self.kinv.grow_inverse(&a, delta);
            // the data term is zero on the new coordinate, so P grows by
            // the same kernel row; its Schur complement is ≥ delta > 0
            let mut ap = vec![0.0; n];
            self.pinv.matvec(&kv, &mut ap);
            let proj_p: f64 = kv.iter().zip(&ap).map(|(k, ai)| k * ai).sum();
            self.pinv.grow_inverse(&ap, kxx - proj_p);
        }
        self.points.push(x.clone());
        self.by_action[x.action].push(self.points.len() - 1);
        self.b.push(0.0);
        self.refresh_alpha();
        Ok(())
    }

    fn refresh_alpha(&mut self) {
        self.alpha = vec![0.0; self.b.len()];
        if !self.b.is_empty() {
            let mut out = vec![0.0; self.b.len()];
            self.pinv.matvec(&self.b, &mut out);
            self.alpha = out;
        }
    }

    /// Posterior mean and variance of the return at (summary, action).
    /// The variance includes the observation noise σ².
    pub fn q_posterior(&self, x: &Point) -> Result<(f64, f64), PolicyError> {
        let sigma2 = self.cfg.noise_std * self.cfg.noise_std;
        let kxx = kernel(x, x)?;
        if self.points.is_empty() {
            return Ok((0.0, kxx + sigma2));
        }
        // restrict to the matching-action block: all other entries of the
        // kernel vector vanish under the Kronecker factor
        let block: &[usize] = if x.action < self.by_action.len() {
            &self.by_action[x.action]
        } else {
            &[]
        };
        let mut mean = 0.0;
        let mut quad = 0.0;
        let n = self.kinv.n;
        let mut kv_block = Vec::with_capacity(block.len());
        for &i in block {
            kv_block.push((i, kernel(x, &self.points[i])?));
        }
        for &(i, ki) in &kv_block {
            mean += ki * self.alpha[i];
            for &(j, kj) in &kv_block {
                quad += ki * (self.kinv.data[i * n + j] - self.pinv.data[i * n + j]) * kj;
            }
        }
        let mut var = kxx - quad + sigma2;
        if var < 0.0 {
            var = 0.0;
        }
        Ok((mean, var))
    }

    fn count_negative_variance(&mut self, var_raw: f64) {
        if var_raw < 0.0 {
            self.negative_variance_warnings += 1;
        }
    }

    /// Chooses an executable action: posterior sampling or greedy means,
    /// ties to the lowest index.
    pub fn select_action(
        &mut self,
        summary: &[f64],
        mode: SelectMode,
        executable: &[bool],
        rng: &mut ChaCha20Rng,
    ) -> Result<usize, PolicyError> {
        let mut best: Option<(usize, f64)> = None;
        for action in 0..self.num_actions() {
            if !executable.get(action).copied().unwrap_or(false) {
                continue;
            }
            let x = Point { summary: summary.to_vec(), action };
            let (mean, var) = self.q_posterior(&x)?;
            self.count_negative_variance(var);
            let score = match mode {
                SelectMode::Greedy => mean,
                SelectMode::Sample => mean + var.max(0.0).sqrt() * standard_normal(rng),
            };
            match best {
                Some((_, s)) if score <= s => {}
                _ => best = Some((action, score)),
            }
        }
        best.map(|(a, _)| a).ok_or(PolicyError::AllMasked)
    }

    /// Feeds one SARSA transition. `next` is the already-chosen successor
    /// state-action, or None at episode end. Steps must arrive in order:
    /// within an episode, `x_t` must be the point announced as `next` on
    /// the previous call.
    pub fn observe_step(
        &mut self,
        x_t: &Point,
        reward: f64,
        next: Option<&Point>,
    ) -> Result<(), PolicyError> {
        if self.episode_active {
            match &self.pending {
                Some(expected) if expected == x_t => {}
                _ => return Err(PolicyError::OutOfOrderStep),
            }
        } else {
            self.consider_admission(x_t)?;
            self.episode_active = true;
        }

        match next {
            Some(nx) => {
                self.consider_admission(nx)?;
                self.pending = Some(nx.clone());
            }
            None => {
                self.pending = None;
                self.episode_active = false;
            }
        }

        // observation functional on representer weights
        let kt = self.kvec(x_t)?;
        let mut phi = kt;
        if let Some(nx) = next {
            let kn = self.kvec(nx)?;
            for (p, k) in phi.iter_mut().zip(&kn) {
                *p -= self.cfg.discount * k;
            }
        }
        if phi.iter().all(|&v| v == 0.0) {
            return Ok(()); // no representable component; nothing to learn
        }

        let sigma2 = self.cfg.noise_std * self.cfg.noise_std;
        let n = self.pinv.n;
        let mut pv = vec![0.0; n];
        self.pinv.matvec(&phi, &mut pv);
        let denom: f64 = sigma2 + phi.iter().zip(&pv).map(|(a, b)| a * b).sum::<f64>();
        self.pinv.rank1_sub(&pv, denom);
        for i in 0..n {
            self.b[i] += phi[i] * reward / sigma2;
        }
        self.refresh_alpha();
        Ok(())
    }
}

/// Box–Muller draw, deterministic under the seeded stream.
fn standard_normal(rng: &mut ChaCha20Rng) -> f64 {
    let u1: f64 = rng.gen_range(f64::MIN_POSITIVE..1.0);
    let u2: f64 = rng.gen();
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand_chacha::rand_core::SeedableRng;

    fn unit_point(dim: usize, hot: usize, action: usize) -> Point {
        let mut summary = vec![0.0; dim];
        summary[hot] = 1.0;
        Point { summary, action }
    }

    #[test]
    fn empty_dictionary_prior() {
        let pol = GpSarsaPolicy::new(3, GpSarsaConfig::default());
        let x = unit_point(4, 0, 1);
        let (mean, var) = pol.q_posterior(&x).unwrap();
        assert_eq!(mean, 0.0);
        assert_eq!(var, 1.0 + 25.0);
    }

    #[test]
    fn single_observation_closed_form() {
        // mean at the observed point: k·R/(k+σ²)
        let cfg = GpSarsaConfig { noise_std: 2.0, ..Default::default() };
        let mut pol = GpSarsaPolicy::new(2, cfg);
        let x = Point { summary: vec![1.0, 2.0], action: 0 };
        let r = 10.0;
        pol.observe_step(&x, r, None).unwrap();
        let (mean, _) = pol.q_posterior(&x).unwrap();
        let k = 5.0;
        assert!((mean - k * r / (k + 4.0)).abs() < 1e-12, "mean {mean}");
    }

    #[test]
    fn unseen_action_keeps_prior_mean() {
        let mut pol = GpSarsaPolicy::new(3, GpSarsaConfig::default());
        let x = unit_point(4, 0, 0);
        pol.observe_step(&x, 4.0, None).unwrap();
        let other = unit_point(4, 0, 2);
        let (mean, _) = pol.q_posterior(&other).unwrap();
        assert_eq!(mean, 0.0);
    }

    #[test]
    fn first_step_admits_duplicate_does_not() {
        let mut pol = GpSarsaPolicy::new(2, GpSarsaConfig::default());
        let x = unit_point(3, 1, 0);
        pol.observe_step(&x, 1.0, None).unwrap();
        assert_eq!(pol.dictionary_size(), 1);
        pol.observe_step(&x, 2.0, None).unwrap();
        assert_eq!(pol.dictionary_size(), 1);
    }

    #[test]
    fn dictionary_monotone_and_capped() {
        let cfg = GpSarsaConfig { dictionary_cap: 3, ..Default::default() };
        let mut pol = GpSarsaPolicy::new(1, cfg);
        let mut last = 0;
        for i in 0..6 {
            let x = unit_point(6, i, 0);
            pol.observe_step(&x, 1.0, None).unwrap();
            let n = pol.dictionary_size();
            assert!(n >= last);
            last = n;
        }
        assert_eq!(pol.dictionary_size(), 3);
    }

    #[test]
    fn out_of_order_step_rejected() {
        let mut pol = GpSarsaPolicy::new(2, GpSarsaConfig::default());
        let a = unit_point(3, 0, 0);
        let b = unit_point(3, 1, 0);
        let c = unit_point(3, 2, 1);
        pol.observe_step(&a, -1.0, Some(&b)).unwrap();
        // episode continues at c instead of the announced b
        let err = pol.observe_step(&c, -1.0, None).unwrap_err();
        assert!(matches!(err, PolicyError::OutOfOrderStep));
    }

    #[test]
    fn single_executable_action_is_chosen_in_both_modes() {
        let mut pol = GpSarsaPolicy::new(4, GpSarsaConfig::default());
        let mask = [false, false, true, false];
        let mut rng = ChaCha20Rng::seed_from_u64(0);
        let s = vec![0.5, 0.5];
        assert_eq!(pol.select_action(&s, SelectMode::Greedy, &mask, &mut rng).unwrap(), 2);
        assert_eq!(pol.select_action(&s, SelectMode::Sample, &mask, &mut rng).unwrap(), 2);
    }

    #[test]
    fn greedy_empty_dictionary_ties_break_low() {
        let mut pol = GpSarsaPolicy::new(4, GpSarsaConfig::default());
        let mask = [false, true, true, true];
        let mut rng = ChaCha20Rng::seed_from_u64(0);
        let s = vec![1.0, 0.0];
        assert_eq!(pol.select_action(&s, SelectMode::Greedy, &mask, &mut rng).unwrap(), 1);
    }

    #[test]
    fn sampling_deterministic_under_seed() {
        let mut pol = GpSarsaPolicy::new(3, GpSarsaConfig::default());
        let mask = [true, true, true];
        let s = vec![1.0, 0.5];
        let mut r1 = ChaCha20Rng::seed_from_u64(7);
        let mut r2 = ChaCha20Rng::seed_from_u64(7);
        let picks1: Vec<usize> = (0..20)
            .map(|_| pol.select_action(&s, SelectMode::Sample, &mask, &mut r1).unwrap())
            .collect();
        let picks2: Vec<usize> = (0..20)
            .map(|_| pol.select_action(&s, SelectMode::Sample, &mask, &mut r2).unwrap())
            .collect();
        assert_eq!(picks1, picks2);
    }

    #[test]
    fn all_masked_errors() {
        let mut pol = GpSarsaPolicy::new(2, GpSarsaConfig::default());
        let mut rng = ChaCha20Rng::seed_from_u64(0);
        assert!(matches!(
            pol.select_action(&[1.0], SelectMode::Greedy, &[false, false], &mut rng),
            Err(PolicyError::AllMasked)
        ));
    }

    #[test]
    fn three_state_chain_converges_to_true_returns() {
        // deterministic chain: x0 --r=-1--> x1 --r=+10--> terminal
        // true Q(x0) = 9, Q(x1) = 10 under γ = 1
        let cfg = GpSarsaConfig { noise_std: 1.0, ..Default::default() };
        let mut pol = GpSarsaPolicy::new(1, cfg);
        let x0 = unit_point(2, 0, 0);
        let x1 = unit_point(2, 1, 0);
        for _ in 0..200 {
            pol.observe_step(&x0, -1.0, Some(&x1)).unwrap();
            pol.observe_step(&x1, 10.0, None).unwrap();
        }
        let (q0, _) = pol.q_posterior(&x0).unwrap();
        let (q1, _) = pol.q_posterior(&x1).unwrap();
        assert!((q0 - 9.0).abs() < 0.5, "Q(x0) = {q0}");
        assert!((q1 - 10.0).abs() < 0.5, "Q(x1) = {q1}");
    }
}
