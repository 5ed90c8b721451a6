//! GP-SARSA dialogue policy: a sparse Gaussian-process approximation of
//! the Q-function over (belief summary, action) pairs, learned online
//! from temporal differences, with posterior-sampling exploration.

mod actions;
mod gp;
mod io;

pub use actions::{ActionSpace, SummaryAction};
pub use gp::{GpSarsaConfig, GpSarsaPolicy, Point, SelectMode};
pub use io::{load_policy, save_policy};

#[derive(Debug, thiserror::Error)]
pub enum PolicyError {
    #[error("summary length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("no executable action")]
    AllMasked,
    #[error("out-of-order step: state does not continue the active episode")]
    OutOfOrderStep,
    #[error("corrupt policy file: {what}")]
    BadContainer { what: String },
    #[error("policy file version mismatch: expected {expected}, got {got}")]
    VersionMismatch { expected: u32, got: u32 },
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

/// Linear belief kernel times a Kronecker delta on the action:
/// k((b₁,a₁),(b₂,a₂)) = ⟨b₁,b₂⟩·𝟙[a₁=a₂].
pub fn kernel(a: &Point, b: &Point) -> Result<f64, PolicyError> {
    if a.summary.len() != b.summary.len() {
        return Err(PolicyError::LengthMismatch {
            left: a.summary.len(),
            right: b.summary.len(),
        });
    }
    if a.action != b.action {
        return Ok(0.0);
    }
    Ok(a.summary.iter().zip(&b.summary).map(|(x, y)| x * y).sum())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kernel_same_point_is_squared_norm() {
        let p = Point { summary: vec![1.0, 2.0, 2.0], action: 3 };
        assert_eq!(kernel(&p, &p).unwrap(), 9.0);
    }

    #[test]
    fn kernel_different_actions_is_zero() {
        let a = Point { summary: vec![1.0, 1.0], action: 0 };
        let b = Point { summary: vec![1.0, 1.0], action: 1 };
        assert_eq!(kernel(&a, &b).unwrap(), 0.0);
    }

    #[test]
    fn kernel_orthogonal_beliefs_is_zero() {
        let a = Point { summary: vec![1.0, 0.0], action: 2 };
        let b = Point { summary: vec![0.0, 1.0], action: 2 };
        assert_eq!(kernel(&a, &b).unwrap(), 0.0);
    }

    #[test]
    fn kernel_length_mismatch_rejected() {
        let a = Point { summary: vec![1.0], action: 0 };
        let b = Point { summary: vec![1.0, 2.0], action: 0 };
        assert!(kernel(&a, &b).is_err());
    }
}
