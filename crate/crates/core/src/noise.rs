//! Reproducible noise increments shared across all solvers.
//!
//! Every sample owns an independent ChaCha stream keyed on
//! `(master_seed, sample_id)`, so paths can be generated in any order or in
//! parallel and always come out bit-identical.

use std::f64::consts::PI;
use std::hash::{DefaultHasher, Hasher};
use std::io::{Read, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rand_distr::{Exp1, Open01, StandardNormal};

use crate::{Error, Result};

/// Magic bytes of the binary increment dump.
pub const DUMP_MAGIC: [u8; 4] = *b"SDEN";
pub const DUMP_VERSION: u32 = 1;

/// Noise increments `ΔW_k` (or `ΔL_k`) of one sample on a uniform time mesh.
#[derive(Debug, Clone, PartialEq)]
pub struct NoisePath {
    pub dt: f64,
    pub steps: usize,
    pub channels: usize,
    /// Row-major `steps × channels`; row `k` is the increment over `(t_k, t_{k+1}]`.
    pub increments: Vec<f64>,
    pub sample_id: u64,
    pub master_seed: u64,
}

impl NoisePath {
    pub fn row(&self, k: usize) -> &[f64] {
        &self.increments[k * self.channels..(k + 1) * self.channels]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.increments.chunks_exact(self.channels)
    }

    /// `max_k ‖ΔW_k‖_max`.
    pub fn max_abs(&self) -> f64 {
        self.increments.iter().fold(0.0_f64, |m, x| m.max(x.abs()))
    }

    /// Running sums `W(t_k)` for `k = 0..=steps`, one row per time.
    pub fn cumulative(&self) -> Vec<Vec<f64>> {
        let mut acc = vec![0.0; self.channels];
        let mut out = Vec::with_capacity(self.steps + 1);
        out.push(acc.clone());
        for row in self.rows() {
            for (a, x) in acc.iter_mut().zip(row) {
                *a += x;
            }
            out.push(acc.clone());
        }
        out
    }

    /// Hash of the increment matrix, used to check that consumers see the
    /// same numbers.
    pub fn fingerprint(&self) -> u64 {
        let mut h = DefaultHasher::new();
        h.write_u64(self.dt.to_bits());
        h.write_usize(self.steps);
        h.write_usize(self.channels);
        for x in &self.increments {
            h.write_u64(x.to_bits());
        }
        h.finish()
    }
}

#[derive(Debug, Clone, Copy)]
#[repr(u64)]
enum Purpose {
    Gaussian = 0x6761_7573,
    Stable = 0x7374_626c,
    Companion = 0x636f_6d70,
}

fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9e37_79b9_7f4a_7c15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

fn stream(master_seed: u64, sample_id: u64, purpose: Purpose) -> ChaCha12Rng {
    let mut state = master_seed ^ (purpose as u64).rotate_left(32);
    let mut key = [0u8; 32];
    for chunk in key.chunks_exact_mut(8) {
        chunk.copy_from_slice(&splitmix64(&mut state).to_le_bytes());
    }
    let mut rng = ChaCha12Rng::from_seed(key);
    rng.set_stream(sample_id);
    rng
}

fn check_mesh(steps: usize, channels: usize, dt: f64) -> Result<()> {
    if steps == 0 {
        return Err(Error::InvalidParameter("number of steps must be at least 1".into()));
    }
    if channels == 0 {
        return Err(Error::InvalidParameter("noise dimension must be at least 1".into()));
    }
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::InvalidParameter(format!("time step must be positive, got {dt}")));
    }
    Ok(())
}

fn check_alpha(alpha: f64) -> Result<()> {
    if !(alpha > 1.0 && alpha <= 2.0) {
        return Err(Error::InvalidParameter(format!(
            "stability index must lie in (1, 2], got {alpha}"
        )));
    }
    Ok(())
}

/// Brownian increments, i.i.d. `N(0, dt)` per entry.
pub fn gaussian_path(master_seed: u64, sample_id: u64, steps: usize, channels: usize, dt: f64) -> Result<NoisePath> {
    check_mesh(steps, channels, dt)?;
    let mut rng = stream(master_seed, sample_id, Purpose::Gaussian);
    let scale = dt.sqrt();
    let increments = (0..steps * channels)
        .map(|_| scale * rng.sample::<f64, _>(StandardNormal))
        .collect();
    Ok(NoisePath {
        dt,
        steps,
        channels,
        increments,
        sample_id,
        master_seed,
    })
}

/// Scalar symmetric α-stable increments `dt^{1/α} ξ_k`,
/// `E exp(iθξ) = exp(-|θ|^α)`.
pub fn stable_path(master_seed: u64, sample_id: u64, steps: usize, alpha: f64, dt: f64) -> Result<NoisePath> {
    stable_path_isotropic(master_seed, sample_id, steps, 1, alpha, dt)
}

/// Increments of a `channels`-dimensional isotropic α-stable motion,
/// `E exp(i⟨θ, ξ⟩) = exp(-|θ|^α)`. One channel uses the Chambers–Mallows–Stuck
/// transform; more channels use the sub-Gaussian representation
/// `ξ = sqrt(2 S) G` with `S` positive (α/2)-stable.
pub fn stable_path_isotropic(
    master_seed: u64,
    sample_id: u64,
    steps: usize,
    channels: usize,
    alpha: f64,
    dt: f64,
) -> Result<NoisePath> {
    check_mesh(steps, channels, dt)?;
    check_alpha(alpha)?;
    let mut rng = stream(master_seed, sample_id, Purpose::Stable);
    let scale = dt.powf(1.0 / alpha);
    let mut increments = Vec::with_capacity(steps * channels);
    if channels == 1 {
        for _ in 0..steps {
            increments.push(scale * symmetric_stable(alpha, &mut rng));
        }
    } else {
        for _ in 0..steps {
            let radial = (2.0 * positive_stable(alpha / 2.0, &mut rng)).sqrt();
            for _ in 0..channels {
                increments.push(scale * radial * rng.sample::<f64, _>(StandardNormal));
            }
        }
    }
    Ok(NoisePath {
        dt,
        steps,
        channels,
        increments,
        sample_id,
        master_seed,
    })
}

/// Independent standard normals from a stream disjoint from the path's own,
/// one per increment entry. Used where a scheme needs a second Gaussian per
/// step that is jointly distributed with `ΔW_k`.
pub fn companion_normals(path: &NoisePath) -> Vec<f64> {
    let mut rng = stream(path.master_seed, path.sample_id, Purpose::Companion);
    (0..path.increments.len())
        .map(|_| rng.sample::<f64, _>(StandardNormal))
        .collect()
}

/// Chambers–Mallows–Stuck draw from `S(α, 0, 0)` with characteristic
/// function `exp(-|θ|^α)`.
pub fn symmetric_stable<R: Rng + ?Sized>(alpha: f64, rng: &mut R) -> f64 {
    let u: f64 = rng.sample(Open01);
    let v = PI * (u - 0.5);
    let w: f64 = rng.sample(Exp1);
    if alpha == 1.0 {
        return v.tan();
    }
    let lead = (alpha * v).sin() / v.cos().powf(1.0 / alpha);
    let tail = (((1.0 - alpha) * v).cos() / w).powf((1.0 - alpha) / alpha);
    lead * tail
}

/// Positive stable draw with Laplace transform `E e^{-sS} = e^{-s^a}`,
/// `0 < a ≤ 1` (Kanter's representation).
pub fn positive_stable<R: Rng + ?Sized>(a: f64, rng: &mut R) -> f64 {
    if a >= 1.0 {
        return 1.0;
    }
    let u: f64 = PI * rng.sample::<f64, _>(Open01);
    let w: f64 = rng.sample(Exp1);
    let lead = (a * u).sin() / u.sin().powf(1.0 / a);
    let tail = (((1.0 - a) * u).sin() / w).powf((1.0 - a) / a);
    lead * tail
}

/// Appends one record (16-byte header, then little-endian `f64`s row-major).
pub fn write_dump<W: Write>(out: &mut W, path: &NoisePath) -> Result<()> {
    let steps = u32::try_from(path.steps).map_err(|_| Error::NoiseFormat("step count exceeds u32".into()))?;
    let channels = u32::try_from(path.channels).map_err(|_| Error::NoiseFormat("channel count exceeds u32".into()))?;
    out.write_all(&DUMP_MAGIC)?;
    out.write_all(&DUMP_VERSION.to_le_bytes())?;
    out.write_all(&steps.to_le_bytes())?;
    out.write_all(&channels.to_le_bytes())?;
    for x in &path.increments {
        out.write_all(&x.to_le_bytes())?;
    }
    Ok(())
}

/// Reads every record in a dump. The format carries no time step, so the
/// caller supplies it; sample ids are assigned by record order.
pub fn read_dump<R: Read>(input: &mut R, dt: f64) -> Result<Vec<NoisePath>> {
    let mut bytes = Vec::new();
    input.read_to_end(&mut bytes)?;
    let mut paths = Vec::new();
    let mut pos = 0usize;
    let word = |at: usize| u32::from_le_bytes(bytes[at..at + 4].try_into().unwrap());
    while pos < bytes.len() {
        if bytes.len() - pos < 16 {
            return Err(Error::NoiseFormat(format!("truncated header at byte {pos}")));
        }
        if bytes[pos..pos + 4] != DUMP_MAGIC {
            return Err(Error::NoiseFormat(format!("bad magic at byte {pos}")));
        }
        let version = word(pos + 4);
        if version != DUMP_VERSION {
            return Err(Error::NoiseFormat(format!("unsupported version {version}")));
        }
        let steps = word(pos + 8) as usize;
        let channels = word(pos + 12) as usize;
        pos += 16;
        let len = steps * channels * 8;
        if bytes.len() - pos < len {
            return Err(Error::NoiseFormat(format!(
                "record {} needs {len} data bytes, {} left",
                paths.len(),
                bytes.len() - pos
            )));
        }
        let increments = bytes[pos..pos + len]
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        pos += len;
        paths.push(NoisePath {
            dt,
            steps,
            channels,
            increments,
            sample_id: paths.len() as u64,
            master_seed: 0,
        });
    }
    Ok(paths)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mean_var(xs: &[f64]) -> (f64, f64) {
        let n = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / n;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
        (mean, var)
    }

    fn ecf(xs: &[f64], theta: f64) -> f64 {
        xs.iter().map(|x| (theta * x).cos()).sum::<f64>() / xs.len() as f64
    }

    #[test]
    fn gaussian_is_reproducible() {
        let a = gaussian_path(7, 3, 100, 2, 0.01).unwrap();
        let b = gaussian_path(7, 3, 100, 2, 0.01).unwrap();
        assert_eq!(a.increments, b.increments);
        assert_eq!(a.fingerprint(), b.fingerprint());
    }

    #[test]
    fn distinct_samples_differ() {
        let a = gaussian_path(7, 0, 10, 1, 1.0).unwrap();
        let b = gaussian_path(7, 1, 10, 1, 1.0).unwrap();
        assert!(a.increments.iter().zip(&b.increments).all(|(x, y)| x != y));
    }

    #[test]
    fn gaussian_mean_is_zero() {
        let p = gaussian_path(11, 0, 1_000_000, 1, 1.0).unwrap();
        let (mean, _) = mean_var(&p.increments);
        assert!(mean.abs() <= 0.004, "mean {mean}");
    }

    #[test]
    fn gaussian_variance_matches_dt() {
        let p = gaussian_path(12, 0, 1_000_000, 1, 0.25).unwrap();
        let (_, var) = mean_var(&p.increments);
        assert!((0.2475..=0.2525).contains(&var), "variance {var}");
    }

    #[test]
    fn stable_alpha_two_is_gaussian_with_variance_two() {
        let p = stable_path(13, 0, 1_000_000, 2.0, 1.0).unwrap();
        let (_, var) = mean_var(&p.increments);
        assert!((1.99..=2.01).contains(&var), "variance {var}");
    }

    #[test]
    fn stable_characteristic_function_at_one() {
        let p = stable_path(14, 0, 1_000_000, 1.5, 1.0).unwrap();
        let phi = ecf(&p.increments, 1.0);
        assert!((phi - (-1.0f64).exp()).abs() <= 0.005, "ecf {phi}");
    }

    #[test]
    fn stable_dt_scaling_is_exact() {
        let dt = 1e-3;
        let unit = stable_path(15, 4, 50, 1.5, 1.0).unwrap();
        let scaled = stable_path(15, 4, 50, 1.5, dt).unwrap();
        let factor = dt.powf(1.0 / 1.5);
        for (u, s) in unit.increments.iter().zip(&scaled.increments) {
            assert_eq!(*s, factor * u);
        }
    }

    #[test]
    fn positive_stable_laplace_transform() {
        let mut rng = stream(1, 1, Purpose::Stable);
        let a = 0.75;
        let n = 400_000;
        let lt: f64 = (0..n).map(|_| (-positive_stable(a, &mut rng)).exp()).sum::<f64>() / n as f64;
        // e^{-S} lies in (0, 1): standard error below 0.5/sqrt(n).
        assert!((lt - (-1.0f64).exp()).abs() < 3.0 * 0.5 / (n as f64).sqrt(), "{lt}");
    }

    #[test]
    fn isotropic_projection_is_scalar_stable() {
        let p = stable_path_isotropic(16, 0, 300_000, 2, 1.5, 1.0).unwrap();
        // ⟨θ, ξ⟩ with |θ| = 1 should have characteristic function exp(-|s|^α).
        let proj: Vec<f64> = p.rows().map(|r| 0.6 * r[0] + 0.8 * r[1]).collect();
        let phi = ecf(&proj, 1.0);
        let sigma = 0.5 / (proj.len() as f64).sqrt();
        assert!((phi - (-1.0f64).exp()).abs() < 3.0 * sigma * 2.0, "ecf {phi}");
    }

    #[test]
    fn alpha_out_of_range_is_rejected() {
        assert!(stable_path(1, 0, 10, 1.0, 0.1).is_err());
        assert!(stable_path(1, 0, 10, 2.5, 0.1).is_err());
    }

    #[test]
    fn dump_round_trip_two_records() {
        let a = gaussian_path(1, 0, 5, 2, 0.1).unwrap();
        let b = gaussian_path(1, 1, 3, 1, 0.1).unwrap();
        let mut buf = Vec::new();
        write_dump(&mut buf, &a).unwrap();
        write_dump(&mut buf, &b).unwrap();
        assert_eq!(&buf[..4], b"SDEN");
        assert_eq!(buf.len(), 16 + 80 + 16 + 24);
        let back = read_dump(&mut buf.as_slice(), 0.1).unwrap();
        assert_eq!(back.len(), 2);
        assert_eq!(back[0].increments, a.increments);
        assert_eq!(back[1].increments, b.increments);
    }

    #[test]
    fn dump_rejects_garbage() {
        let mut bytes = b"NOPE\x01\0\0\0\x01\0\0\0\x01\0\0\0".to_vec();
        bytes.extend_from_slice(&1.0f64.to_le_bytes());
        assert!(matches!(
            read_dump(&mut bytes.as_slice(), 0.1),
            Err(Error::NoiseFormat(_))
        ));
    }
}
