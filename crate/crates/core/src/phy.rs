//! Uplink physical layer: orthogonal pilots, LMMSE channel estimation,
//! LMMSE combining, symbol detection and per-UE SINR.

use nalgebra::Cholesky;
use nalgebra::Dyn;
use rand::Rng;

use crate::linalg::{complex_gaussian, hermitize, hpd_cholesky, CMatrix, CVector, C64};
use crate::{Error, Result};

/// τ×τ orthogonal pilot matrix; column p is the pilot sequence φ_p.
#[derive(Debug, Clone, PartialEq)]
pub struct PilotBook {
    pub matrix: CMatrix,
    /// True when the book uses the real ±1 (BPSK) alphabet.
    pub bpsk: bool,
}

impl PilotBook {
    pub fn len(&self) -> usize {
        self.matrix.ncols()
    }

    pub fn is_empty(&self) -> bool {
        self.matrix.ncols() == 0
    }

    pub fn pilot(&self, p: usize) -> CVector {
        self.matrix.column(p).into_owned()
    }
}

/// Sylvester–Hadamard book (BPSK alphabet) when τ is a power of two,
/// otherwise the unit-modulus DFT book. Both satisfy ΦᴴΦ = τI.
pub fn build_pilot_book(tau: usize) -> Result<PilotBook> {
    if tau == 0 {
        return Err(Error::domain("pilot length must be at least 1"));
    }
    if tau.is_power_of_two() {
        let matrix = CMatrix::from_fn(tau, tau, |i, j| {
            let sign = if (i & j).count_ones() % 2 == 0 { 1.0 } else { -1.0 };
            C64::new(sign, 0.0)
        });
        Ok(PilotBook { matrix, bpsk: true })
    } else {
        log::info!("pilot length {tau} is not a power of two; using the DFT pilot book");
        let matrix = CMatrix::from_fn(tau, tau, |i, j| {
            C64::from_polar(1.0, -std::f64::consts::TAU * (i * j % tau) as f64 / tau as f64)
        });
        Ok(PilotBook {
            matrix,
            bpsk: false,
        })
    }
}

/// Received pilot block Y = HΨ + N, where row k of Ψ is √p_u·φ_{π_k}ᵀ.
pub fn pilot_rx<R: Rng + ?Sized>(
    channels: &CMatrix,
    pilot_of: &[usize],
    book: &PilotBook,
    tx_power: f64,
    noise_power: f64,
    rng: &mut R,
) -> CMatrix {
    let (dim, k) = channels.shape();
    assert_eq!(k, pilot_of.len(), "one pilot index per active UE");
    let tau = book.len();
    let amp = tx_power.sqrt();
    let mut y = CMatrix::zeros(dim, tau);
    for (col, &p) in pilot_of.iter().enumerate() {
        let h = channels.column(col);
        for t in 0..tau {
            let s = book.matrix[(t, p)] * amp;
            let mut yc = y.column_mut(t);
            yc.axpy(s, &h, C64::new(1.0, 0.0));
        }
    }
    if noise_power > 0.0 {
        for v in y.iter_mut() {
            *v += complex_gaussian(rng, noise_power);
        }
    }
    y
}

/// y_k^p = Y·ψ_k^* / (p_u·τ).
pub fn correlate(y: &CMatrix, psi: &CVector, tx_power: f64) -> CVector {
    let tau = psi.len() as f64;
    (y * psi.conjugate()) / C64::new(tx_power * tau, 0.0)
}

/// LMMSE estimator for one active UE, fixed for a given active set:
/// ĥ = R Q⁻¹ y and R̃ = R − R Q⁻¹ R with Q = R + Σ R_j + σ²/(p_u τ)·I.
#[derive(Debug, Clone)]
pub struct LmmseEstimator {
    /// R Q⁻¹.
    pub gain: CMatrix,
    pub error_cov: CMatrix,
}

impl LmmseEstimator {
    /// `block` is the size of the diagonal blocks shared by every covariance
    /// (M for block-diagonal compound covariances, MS for dense).
    pub fn new(
        own: &CMatrix,
        interferers: &[&CMatrix],
        noise_term: f64,
        block: usize,
    ) -> Result<Self> {
        let dim = own.nrows();
        if block == 0 || dim % block != 0 {
            return Err(Error::domain(format!("block size {block} does not divide {dim}")));
        }
        let mut gain = CMatrix::zeros(dim, dim);
        let mut error_cov = CMatrix::zeros(dim, dim);
        for off in (0..dim).step_by(block) {
            let r = own.view((off, off), (block, block)).into_owned();
            let mut q = r.clone();
            for j in interferers {
                q += j.view((off, off), (block, block));
            }
            for i in 0..block {
                q[(i, i)] += C64::new(noise_term, 0.0);
            }
            let chol = hpd_cholesky(q, noise_term == 0.0, "LMMSE estimator Q_k")?;
            // X = Q⁻¹R, so R Q⁻¹ = Xᴴ because Q and R are Hermitian.
            let x = chol.solve(&r);
            gain.view_mut((off, off), (block, block)).copy_from(&x.adjoint());
            let mut e = &r - &r * &x;
            hermitize(&mut e);
            error_cov.view_mut((off, off), (block, block)).copy_from(&e);
        }
        Ok(Self { gain, error_cov })
    }

    pub fn estimate(&self, y: &CVector) -> CVector {
        &self.gain * y
    }
}

/// ĥ_k and R̃_k from the correlator output of UE k.
pub fn lmmse_estimate(
    own: &CMatrix,
    interferers: &[&CMatrix],
    y: &CVector,
    tx_power: f64,
    tau: usize,
    noise_power: f64,
) -> Result<(CVector, CMatrix)> {
    let est = LmmseEstimator::new(own, interferers, noise_power / (tx_power * tau as f64), own.nrows())?;
    Ok((est.estimate(y), est.error_cov))
}

/// The regularised matrix ĤĤᴴ + ΣR̃ + (σ²/p_u)·I shared by the combiner and
/// the SINR.
fn combiner_system(h_hat: &CMatrix, error_cov_sum: &CMatrix, noise_ratio: f64) -> CMatrix {
    let mut a = h_hat * h_hat.adjoint() + error_cov_sum;
    for i in 0..a.nrows() {
        a[(i, i)] += C64::new(noise_ratio, 0.0);
    }
    hermitize(&mut a);
    a
}

/// LMMSE combining matrix W (columns w_k), one factorisation for all UEs.
pub fn lmmse_combiner(
    h_hat: &CMatrix,
    error_cov_sum: &CMatrix,
    tx_power: f64,
    noise_power: f64,
) -> Result<CMatrix> {
    let ratio = noise_power / tx_power;
    let a = combiner_system(h_hat, error_cov_sum, ratio);
    let chol: Cholesky<C64, Dyn> = hpd_cholesky(a, ratio == 0.0, "LMMSE combiner")?;
    Ok(chol.solve(h_hat))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Constellation {
    Bpsk,
    /// Gray-labelled: bit 0 sets the real sign, bit 1 the imaginary sign.
    Qpsk,
}

impl Constellation {
    pub fn points(self) -> Vec<C64> {
        match self {
            Constellation::Bpsk => vec![C64::new(1.0, 0.0), C64::new(-1.0, 0.0)],
            Constellation::Qpsk => {
                let a = std::f64::consts::FRAC_1_SQRT_2;
                (0..4)
                    .map(|i| {
                        let re = if i & 1 == 0 { a } else { -a };
                        let im = if i & 2 == 0 { a } else { -a };
                        C64::new(re, im)
                    })
                    .collect()
            }
        }
    }

    pub fn size(self) -> usize {
        match self {
            Constellation::Bpsk => 2,
            Constellation::Qpsk => 4,
        }
    }

    pub fn point(self, index: usize) -> C64 {
        self.points()[index]
    }

    /// Index of the nearest point (minimum Euclidean distance).
    pub fn decide(self, z: C64) -> usize {
        match self {
            Constellation::Bpsk => usize::from(z.re < 0.0),
            Constellation::Qpsk => usize::from(z.re < 0.0) | (usize::from(z.im < 0.0) << 1),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DetectionResult {
    /// r̂ = Wᴴy.
    pub soft: CVector,
    /// Index into the constellation for each UE.
    pub decisions: Vec<usize>,
}

/// Soft symbols r̂ = Wᴴy and their minimum-distance decisions.
pub fn detect(w: &CMatrix, y: &CVector, constellation: Constellation) -> DetectionResult {
    let soft = w.ad_mul(y);
    let decisions = soft.iter().map(|&z| constellation.decide(z)).collect();
    DetectionResult { soft, decisions }
}

/// Instantaneous SINR of UE `k`:
/// |w_kᴴĥ_k|² / w_kᴴ(Σ_{j≠k} ĥ_jĥ_jᴴ + ΣR̃ + σ²/p_u·I)w_k.
pub fn instantaneous_sinr(
    k: usize,
    w: &CMatrix,
    h_hat: &CMatrix,
    error_cov_sum: &CMatrix,
    tx_power: f64,
    noise_power: f64,
) -> f64 {
    let wk = w.column(k);
    let gains = h_hat.ad_mul(&wk); // ĥ_jᴴ w_k
    let signal = gains[k].norm_sqr();
    let interference: f64 = gains
        .iter()
        .enumerate()
        .filter(|&(j, _)| j != k)
        .map(|(_, g)| g.norm_sqr())
        .sum();
    let err = wk.dotc(&(error_cov_sum * wk)).re;
    let noise = noise_power / tx_power * wk.norm_squared();
    signal / (interference + err + noise)
}

pub fn sinr_all(
    w: &CMatrix,
    h_hat: &CMatrix,
    error_cov_sum: &CMatrix,
    tx_power: f64,
    noise_power: f64,
) -> Vec<f64> {
    (0..w.ncols())
        .map(|k| instantaneous_sinr(k, w, h_hat, error_cov_sum, tx_power, noise_power))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{complex_gaussian_vector, hermitian_defect, min_eigenvalue, trace_re};
    use crate::rng::substream;

    fn c(re: f64) -> C64 {
        C64::new(re, 0.0)
    }

    fn random_cov(seed: u64, n: usize, rank: usize) -> CMatrix {
        let mut rng = substream(seed, &[]);
        let a = CMatrix::from_fn(n, rank, |_, _| complex_gaussian(&mut rng, 1.0 / rank as f64));
        &a * a.adjoint()
    }

    /// Draw h ~ CN(0, R) through a Cholesky-free eigen factor.
    fn draw(r: &CMatrix, rng: &mut crate::rng::SimRng) -> CVector {
        let eig = r.clone().symmetric_eigen();
        let z = complex_gaussian_vector(rng, r.nrows(), 1.0);
        let scaled = CVector::from_fn(r.nrows(), |i, _| z[i] * eig.eigenvalues[i].max(0.0).sqrt());
        &eig.eigenvectors * scaled
    }

    #[test]
    fn pilot_books() {
        assert_eq!(build_pilot_book(1).unwrap().matrix, CMatrix::from_element(1, 1, c(1.0)));
        let b2 = build_pilot_book(2).unwrap();
        assert_eq!(b2.pilot(0), CVector::from_vec(vec![c(1.0), c(1.0)]));
        assert_eq!(b2.pilot(1), CVector::from_vec(vec![c(1.0), c(-1.0)]));
        for tau in [6, 16, 64] {
            let b = build_pilot_book(tau).unwrap();
            assert_eq!(b.bpsk, tau.is_power_of_two());
            let gram = b.matrix.adjoint() * &b.matrix;
            let err = (gram - CMatrix::identity(tau, tau) * c(tau as f64)).norm();
            assert!(err < 1e-10, "tau {tau}: {err}");
            assert!(b.matrix.iter().all(|z| (z.norm() - 1.0).abs() < 1e-12));
        }
        assert!(build_pilot_book(0).is_err());
    }

    #[test]
    fn noiseless_pilot_block_and_correlation() {
        let mut rng = substream(1, &[]);
        let book = build_pilot_book(4).unwrap();
        let h = CMatrix::from_fn(6, 1, |_, _| complex_gaussian(&mut rng, 1.0));
        let y = pilot_rx(&h, &[2], &book, 2.0, 0.0, &mut rng);
        let psi = book.pilot(2) * c(2f64.sqrt());
        assert!((&y - h.column(0) * psi.transpose()).norm() < 1e-12);
        assert!((correlate(&y, &psi, 2.0) - h.column(0)).norm() < 1e-12);

        // Interferer on the same pilot adds, the one on another pilot cancels.
        let h3 = CMatrix::from_fn(6, 3, |_, _| complex_gaussian(&mut rng, 1.0));
        let y = pilot_rx(&h3, &[1, 1, 3], &book, 1.0, 0.0, &mut rng);
        let yk = correlate(&y, &book.pilot(1), 1.0);
        assert!((yk - h3.column(0) - h3.column(1)).norm() < 1e-12);

        let book = build_pilot_book(64).unwrap();
        let h = CMatrix::zeros(192, 64);
        let y = pilot_rx(&h, &(0..64).collect::<Vec<_>>(), &book, 1.0, 1.0, &mut rng);
        assert_eq!(y.shape(), (192, 64));
    }

    #[test]
    fn pilot_noise_energy() {
        let book = build_pilot_book(8).unwrap();
        let h = CMatrix::zeros(6, 1);
        let mut rng = substream(2, &[]);
        let draws = 10_000;
        let sigma2 = 0.3;
        let mean: f64 = (0..draws)
            .map(|_| pilot_rx(&h, &[0], &book, 1.0, sigma2, &mut rng).norm_squared())
            .sum::<f64>()
            / draws as f64;
        let expected = 6.0 * 8.0 * sigma2;
        assert!((mean / expected - 1.0).abs() < 0.01, "{mean} vs {expected}");
    }

    #[test]
    fn correlator_noise_variance() {
        let book = build_pilot_book(6).unwrap();
        let h = CMatrix::zeros(2, 1);
        let mut rng = substream(3, &[]);
        let (pu, s2): (f64, f64) = (2.0, 0.5);
        let psi = book.pilot(4) * c(pu.sqrt());
        let draws = 100_000;
        let mut acc = 0.0;
        for _ in 0..draws {
            let y = pilot_rx(&h, &[4], &book, pu, s2, &mut rng);
            acc += correlate(&y, &psi, pu).norm_squared() / 2.0;
        }
        let var = acc / draws as f64;
        let expected = s2 / (pu * 6.0);
        assert!((var / expected - 1.0).abs() < 0.02, "{var} vs {expected}");
    }

    #[test]
    fn scalar_lmmse() {
        let r = CMatrix::from_element(1, 1, c(1.0));
        let y = CVector::from_element(1, c(2.0));
        // noise term σ²/(p_u τ) = 1.
        let (h, e) = lmmse_estimate(&r, &[], &y, 1.0, 1, 1.0).unwrap();
        assert!((h[0] - c(1.0)).norm() < 1e-15);
        assert!((e[(0, 0)] - c(0.5)).norm() < 1e-15);
    }

    #[test]
    fn noiseless_limit() {
        let r = random_cov(4, 5, 5);
        let h = draw(&r, &mut substream(5, &[]));
        let (est, err) = lmmse_estimate(&r, &[], &h, 1.0, 4, 1e-12).unwrap();
        assert!((est - &h).norm() < 1e-6 * h.norm());
        assert!(trace_re(&err) < 1e-6 * trace_re(&r));
    }

    #[test]
    fn zero_noise_rank_deficient_uses_ridge() {
        let r = random_cov(6, 4, 1);
        let j = random_cov(7, 4, 1);
        let y = CVector::from_element(4, c(1.0));
        let (h, e) = lmmse_estimate(&r, &[&j], &y, 1.0, 1, 0.0).unwrap();
        assert!(h.iter().all(|z| z.re.is_finite()));
        assert!(hermitian_defect(&e) < 1e-10);
    }

    #[test]
    fn block_estimator_matches_dense() {
        let blocks = |seed| {
            crate::linalg::block_diagonal(&[random_cov(seed, 3, 2), random_cov(seed + 50, 3, 3)])
        };
        let (r, j) = (blocks(8), blocks(9));
        let dense = LmmseEstimator::new(&r, &[&j], 0.1, 6).unwrap();
        let block = LmmseEstimator::new(&r, &[&j], 0.1, 3).unwrap();
        assert!((&dense.gain - &block.gain).norm() < 1e-10);
        assert!((&dense.error_cov - &block.error_cov).norm() < 1e-10);
        assert!(LmmseEstimator::new(&r, &[], 0.1, 4).is_err());
    }

    #[test]
    fn error_covariance_properties() {
        for seed in 0..20 {
            let r = random_cov(seed, 6, 3);
            let js: Vec<CMatrix> = (0..3).map(|i| random_cov(100 + seed * 10 + i, 6, 2)).collect();
            let mut prev = f64::INFINITY;
            // Removing interferers one at a time never raises the MSE.
            for n in (0..=3).rev() {
                let refs: Vec<&CMatrix> = js[..n].iter().collect();
                let est = LmmseEstimator::new(&r, &refs, 0.05, 6).unwrap();
                assert!(hermitian_defect(&est.error_cov) < 1e-10);
                assert!(min_eigenvalue(&est.error_cov) >= -1e-10 * trace_re(&r));
                let t = trace_re(&est.error_cov);
                assert!(t <= trace_re(&r) + 1e-12);
                if n < 3 {
                    assert!(t <= prev + 1e-12);
                }
                prev = t;
            }
        }
    }

    #[test]
    fn monte_carlo_mse_orthogonality_and_dominance() {
        let r = random_cov(10, 6, 3);
        let j = random_cov(11, 6, 3);
        let (pu, tau, s2): (f64, usize, f64) = (1.0, 4, 0.4);
        let book = build_pilot_book(tau).unwrap();
        let est = LmmseEstimator::new(&r, &[&j], s2 / (pu * tau as f64), 6).unwrap();
        let mut rng = substream(12, &[]);
        let trials = 10_000;
        let (mut mse, mut raw) = (0.0, 0.0);
        let mut cross = CMatrix::zeros(6, 6);
        let mut cross_sq = CMatrix::zeros(6, 6).map(|_: C64| 0.0f64);
        for _ in 0..trials {
            let hk = draw(&r, &mut rng);
            let hj = draw(&j, &mut rng);
            let mut h = CMatrix::zeros(6, 2);
            h.set_column(0, &hk);
            h.set_column(1, &hj);
            let y = pilot_rx(&h, &[0, 0], &book, pu, s2, &mut rng);
            let yk = correlate(&y, &(book.pilot(0) * c(pu.sqrt())), pu);
            let hh = est.estimate(&yk);
            let e = &hk - &hh;
            mse += e.norm_squared();
            raw += (&yk - &hk).norm_squared();
            let outer = &hh * e.adjoint();
            cross += &outer;
            cross_sq += outer.map(|z| z.norm_sqr());
        }
        let n = trials as f64;
        let mse = mse / n;
        let expected = trace_re(&est.error_cov);
        assert!((mse / expected - 1.0).abs() < 0.02, "{mse} vs {expected}");
        assert!(mse <= raw / n);
        // Cross-covariance E[ĥ eᴴ] vanishes within 3 standard errors.
        let mean = cross / C64::new(n, 0.0);
        let var: f64 = cross_sq.iter().sum::<f64>() / n - mean.norm_squared();
        let se = (var / n).sqrt();
        assert!(mean.norm() <= 3.0 * se, "{} vs {}", mean.norm(), se);
    }

    #[test]
    fn scalar_combiner_and_sinr() {
        let h = CMatrix::from_element(1, 1, c(1.0));
        let z = CMatrix::zeros(1, 1);
        let w = lmmse_combiner(&h, &z, 1.0, 1.0).unwrap();
        assert!((w[(0, 0)] - c(0.5)).norm() < 1e-15);
        for wv in [0.3, -2.0, 7.5] {
            let w = CMatrix::from_element(1, 1, C64::new(wv, 0.4));
            assert!((instantaneous_sinr(0, &w, &h, &z, 1.0, 1.0) - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_forcing_limit() {
        let mut rng = substream(13, &[]);
        let h = CMatrix::from_fn(8, 4, |_, _| complex_gaussian(&mut rng, 1.0));
        let w = lmmse_combiner(&h, &CMatrix::zeros(8, 8), 1.0, 1e-12).unwrap();
        let g = w.adjoint() * &h;
        assert!((g - CMatrix::identity(4, 4)).norm() < 1e-6);
    }

    #[test]
    fn combiner_scaling_keeps_decisions() {
        let mut rng = substream(14, &[]);
        let h = CMatrix::from_fn(8, 4, |_, _| complex_gaussian(&mut rng, 1.0));
        let q = Constellation::Qpsk;
        for _ in 0..50 {
            let x = CVector::from_fn(4, |_, _| q.point(rng.random_range(0..4)));
            let y = &h * &x + complex_gaussian_vector(&mut rng, 8, 0.1);
            let w1 = lmmse_combiner(&h, &CMatrix::zeros(8, 8), 1.0, 0.1).unwrap();
            // Scaling Ĥ and y by 3 and σ² by 9 leaves the decisions intact.
            let ys = &y * c(3.0);
            let d1 = detect(&w1, &y, q).decisions;
            let w3s = lmmse_combiner(&(&h * c(3.0)), &CMatrix::zeros(8, 8), 1.0, 0.9).unwrap();
            assert_eq!(d1, detect(&w3s, &ys, q).decisions);
        }
    }

    #[test]
    fn sinr_matches_dense_oracle_and_is_scale_free() {
        let mut rng = substream(15, &[]);
        for _ in 0..20 {
            let h = CMatrix::from_fn(8, 3, |_, _| complex_gaussian(&mut rng, 1.0));
            let e = random_cov(rng.random(), 8, 4) * c(0.1);
            let w = lmmse_combiner(&h, &e, 2.0, 0.5).unwrap();
            for k in 0..3 {
                let got = instantaneous_sinr(k, &w, &h, &e, 2.0, 0.5);
                // Dense oracle: build the interference-plus-noise matrix.
                let mut b = e.clone() + CMatrix::identity(8, 8) * c(0.25);
                for j in (0..3).filter(|&j| j != k) {
                    b += h.column(j) * h.column(j).adjoint();
                }
                let wk = w.column(k).into_owned();
                let num = (wk.adjoint() * h.column(k))[(0, 0)].norm_sqr();
                let den = (wk.adjoint() * &b * &wk)[(0, 0)].re;
                assert!((got / (num / den) - 1.0).abs() < 1e-10);
                let mut ws = w.clone();
                ws.column_mut(k).scale_mut(-4.2);
                assert!((instantaneous_sinr(k, &ws, &h, &e, 2.0, 0.5) / got - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn detection_examples() {
        let q = Constellation::Qpsk;
        let a = std::f64::consts::FRAC_1_SQRT_2;
        assert_eq!(q.point(q.decide(C64::new(0.9, 0.1))), C64::new(a, a));
        for (i, p) in q.points().into_iter().enumerate() {
            assert_eq!(q.decide(p), i);
            // Minimum-distance agrees with the quadrant rule.
            let z = p * 0.3 + C64::new(0.01, -0.02);
            let nearest = q
                .points()
                .iter()
                .enumerate()
                .min_by(|x, y| (x.1 - z).norm().total_cmp(&(y.1 - z).norm()))
                .unwrap()
                .0;
            assert_eq!(q.decide(z), nearest);
        }
        assert_eq!(Constellation::Bpsk.decide(C64::new(-0.2, 5.0)), 1);

        let mut rng = substream(16, &[]);
        let h = CMatrix::from_fn(8, 3, |_, _| complex_gaussian(&mut rng, 1.0));
        let w = (h.adjoint() * &h).try_inverse().unwrap() * h.adjoint();
        let w = w.adjoint();
        let x = CVector::from_vec(vec![q.point(0), q.point(3), q.point(2)]);
        let d = detect(&w, &(&h * &x), q);
        assert_eq!(d.decisions, vec![0, 3, 2]);
    }

    #[test]
    fn qpsk_ser_in_rayleigh_fading() {
        // MS = 8, K = 1, perfect CSI, rank-one Rayleigh channel h = g·v with
        // mean post-combining SNR 20 dB. Reference: numerical average of the
        // AWGN QPSK SER 2Q(√γ) − Q(√γ)² over γ ~ Exp(mean 100).
        use statrs::function::erf::erfc;
        let qf = |x: f64| 0.5 * erfc(x / 2f64.sqrt());
        let mean_snr = 100.0;
        let steps = 200_000;
        let dx = 40.0 / steps as f64;
        let theory: f64 = (0..steps)
            .map(|i| {
                let x = (i as f64 + 0.5) * dx;
                let q = qf((mean_snr * x).sqrt());
                (2.0 * q - q * q) * (-x).exp() * dx
            })
            .sum();

        let mut rng = substream(17, &[]);
        let v = complex_gaussian_vector(&mut rng, 8, 1.0);
        let v = &v / C64::new(v.norm(), 0.0);
        let (pu, s2) = (1.0, 1.0 / mean_snr);
        let q = Constellation::Qpsk;
        let symbols = 100_000;
        let mut errors = 0;
        for _ in 0..symbols {
            let g = complex_gaussian(&mut rng, 1.0);
            let h = CMatrix::from_column_slice(8, 1, (&v * g).as_slice());
            let w = lmmse_combiner(&h, &CMatrix::zeros(8, 8), pu, s2).unwrap();
            let s = rng.random_range(0..4);
            let y = &h * q.point(s) + complex_gaussian_vector(&mut rng, 8, s2);
            if detect(&w, &y, q).decisions[0] != s {
                errors += 1;
            }
        }
        let ser = errors as f64 / symbols as f64;
        assert!(ser > theory / 2.0 && ser < theory * 2.0, "{ser} vs {theory}");
    }
}
