//! Binary policy container: dictionary points, coefficient state, and
//! hyperparameters with bit-exact f64 round trips. Policies are saved
//! between episodes; mid-episode bookkeeping is not persisted.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::gp::{GpSarsaConfig, GpSarsaPolicy, Point, SquareMat};
use super::PolicyError;

const MAGIC: &[u8; 4] = b"IQDP";
const VERSION: u32 = 1;

pub fn save_policy(path: &Path, policy: &GpSarsaPolicy) -> Result<(), PolicyError> {
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(MAGIC)?;
    w.write_all(&VERSION.to_le_bytes())?;
    for v in [
        policy.cfg.noise_std,
        policy.cfg.sparsity_threshold,
        policy.cfg.discount,
    ] {
        w.write_all(&v.to_bits().to_le_bytes())?;
    }
    w.write_all(&(policy.cfg.dictionary_cap as u64).to_le_bytes())?;
    w.write_all(&(policy.num_actions() as u32).to_le_bytes())?;
    w.write_all(&policy.negative_variance_warnings.to_le_bytes())?;
    let n = policy.points.len();
    w.write_all(&(n as u32).to_le_bytes())?;
    for p in &policy.points {
        w.write_all(&(p.summary.len() as u32).to_le_bytes())?;
        for v in &p.summary {
            w.write_all(&v.to_bits().to_le_bytes())?;
        }
        w.write_all(&(p.action as u32).to_le_bytes())?;
    }
    for mat in [&policy.kinv, &policy.pinv] {
        for v in &mat.data {
            w.write_all(&v.to_bits().to_le_bytes())?;
        }
    }
    for vec in [&policy.b, &policy.alpha] {
        for v in vec {
            w.write_all(&v.to_bits().to_le_bytes())?;
        }
    }
    Ok(())
}

pub fn load_policy(path: &Path) -> Result<GpSarsaPolicy, PolicyError> {
    let mut r = BufReader::new(File::open(path)?);
    let mut magic = [0u8; 4];
    read(&mut r, &mut magic)?;
    if &magic != MAGIC {
        return Err(PolicyError::BadContainer { what: format!("magic {magic:?}") });
    }
    let version = read_u32(&mut r)?;
    if version != VERSION {
        return Err(PolicyError::VersionMismatch { expected: VERSION, got: version });
    }
    let noise_std = read_f64(&mut r)?;
    let sparsity_threshold = read_f64(&mut r)?;
    let discount = read_f64(&mut r)?;
    let dictionary_cap = read_u64(&mut r)? as usize;
    let num_actions = read_u32(&mut r)? as usize;
    let warnings = read_u64(&mut r)?;
    let n = read_u32(&mut r)? as usize;
    if n > dictionary_cap.max(1 << 20) {
        return Err(PolicyError::BadContainer { what: format!("dictionary size {n}") });
    }

    let cfg = GpSarsaConfig { noise_std, sparsity_threshold, discount, dictionary_cap };
    let mut policy = GpSarsaPolicy::new(num_actions, cfg);
    policy.negative_variance_warnings = warnings;
    for _ in 0..n {
        let dim = read_u32(&mut r)? as usize;
        let mut summary = Vec::with_capacity(dim);
        for _ in 0..dim {
            summary.push(read_f64(&mut r)?);
        }
        let action = read_u32(&mut r)? as usize;
        if action >= num_actions {
            return Err(PolicyError::BadContainer { what: format!("action {action}") });
        }
        policy.by_action[action].push(policy.points.len());
        policy.points.push(Point { summary, action });
    }
    let mut kinv = vec![0.0; n * n];
    for v in kinv.iter_mut() {
        *v = read_f64(&mut r)?;
    }
    let mut pinv = vec![0.0; n * n];
    for v in pinv.iter_mut() {
        *v = read_f64(&mut r)?;
    }
    policy.kinv = SquareMat { data: kinv, n };
    policy.pinv = SquareMat { data: pinv, n };
    policy.b = (0..n).map(|_| read_f64(&mut r)).collect::<Result<_, _>>()?;
    policy.alpha = (0..n).map(|_| read_f64(&mut r)).collect::<Result<_, _>>()?;
    Ok(policy)
}

fn read<R: Read>(r: &mut R, buf: &mut [u8]) -> Result<(), PolicyError> {
    r.read_exact(buf).map_err(|_| PolicyError::BadContainer { what: "truncated file".into() })
}

fn read_u32<R: Read>(r: &mut R) -> Result<u32, PolicyError> {
    let mut b = [0u8; 4];
    read(r, &mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn read_u64<R: Read>(r: &mut R) -> Result<u64, PolicyError> {
    let mut b = [0u8; 8];
    read(r, &mut b)?;
    Ok(u64::from_le_bytes(b))
}

fn read_f64<R: Read>(r: &mut R) -> Result<f64, PolicyError> {
    Ok(f64::from_bits(read_u64(r)?))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn trained_policy() -> GpSarsaPolicy {
        let mut pol = GpSarsaPolicy::new(3, GpSarsaConfig::default());
        let a = Point { summary: vec![1.0, 0.25, 0.5], action: 0 };
        let b = Point { summary: vec![0.0, 1.0, 0.5], action: 1 };
        pol.observe_step(&a, -1.0, Some(&b)).unwrap();
        pol.observe_step(&b, 19.0, None).unwrap();
        pol
    }

    #[test]
    fn round_trip_preserves_posterior_bitwise() {
        let pol = trained_policy();
        let f = tempfile::NamedTempFile::new().unwrap();
        save_policy(f.path(), &pol).unwrap();
        let back = load_policy(f.path()).unwrap();
        assert_eq!(back.dictionary_size(), pol.dictionary_size());
        let q = Point { summary: vec![0.5, 0.5, 0.5], action: 1 };
        let (m1, v1) = pol.q_posterior(&q).unwrap();
        let (m2, v2) = back.q_posterior(&q).unwrap();
        assert_eq!(m1.to_bits(), m2.to_bits());
        assert_eq!(v1.to_bits(), v2.to_bits());
    }

    #[test]
    fn empty_dictionary_round_trip() {
        let pol = GpSarsaPolicy::new(5, GpSarsaConfig::default());
        let f = tempfile::NamedTempFile::new().unwrap();
        save_policy(f.path(), &pol).unwrap();
        let back = load_policy(f.path()).unwrap();
        assert_eq!(back.dictionary_size(), 0);
        assert_eq!(back.num_actions(), 5);
    }

    #[test]
    fn corrupt_and_mismatched_files_rejected() {
        let pol = trained_policy();
        let f = tempfile::NamedTempFile::new().unwrap();
        save_policy(f.path(), &pol).unwrap();
        let bytes = std::fs::read(f.path()).unwrap();
        std::fs::write(f.path(), &bytes[..bytes.len() - 3]).unwrap();
        assert!(matches!(load_policy(f.path()), Err(PolicyError::BadContainer { .. })));

        let mut wrong = bytes.clone();
        wrong[4] = 99; // version field
        std::fs::write(f.path(), &wrong).unwrap();
        assert!(matches!(load_policy(f.path()), Err(PolicyError::VersionMismatch { .. })));
    }
}
