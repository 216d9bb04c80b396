//! Symmetric gauge functions on R^d: norms invariant under coordinate
//! permutations and sign flips. Each gauge provides evaluation, dual
//! evaluation, a proximal operator (where available), the polar operator,
//! and the structural constants its recovery bounds need.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{GdsError, Result};
use crate::util::{abs_sorted_desc, is_nonneg_descending, pava_nonincreasing};

/// Which symmetric gauge.
#[derive(Debug, Clone, PartialEq)]
pub enum GaugeKind {
    /// Sum of absolute values.
    L1,
    /// Euclidean norm.
    L2,
    /// Ordered weighted l1: inner product of |v| sorted descending with the
    /// weight vector (stored nonnegative descending).
    Owl(DVector<f64>),
    /// k-support norm: infimal convolution of l2 norms over k-sparse parts.
    KSupport(usize),
    /// Sum of the k largest magnitudes. Evaluation and dual only; no prox.
    KyFan(usize),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Gauge {
    kind: GaugeKind,
    dim: usize,
}

/// Ratio of the largest to the smallest entry of a polar-operator output.
/// Kept tagged so downstream bounds can switch to their ratio-free fallback
/// instead of doing arithmetic with a float infinity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Rho {
    Finite(f64),
    Infinite,
}

impl Rho {
    pub fn is_finite(&self) -> bool {
        matches!(self, Rho::Finite(_))
    }

    /// Finite value, if any.
    pub fn value(&self) -> Option<f64> {
        match self {
            Rho::Finite(v) => Some(*v),
            Rho::Infinite => None,
        }
    }
}

/// theta_max / theta_min for a nonnegative descending subgradient; the
/// all-zero vector is degenerate and rejected.
pub fn rho(theta_star: &DVector<f64>) -> Result<Rho> {
    if !is_nonneg_descending(theta_star) {
        return Err(GdsError::InvalidArgument(
            "rho expects a nonnegative descending vector".into(),
        ));
    }
    let max = theta_star[0];
    let min = theta_star[theta_star.len() - 1];
    if max == 0.0 {
        return Err(GdsError::Degenerate(
            "rho of the all-zero subgradient".into(),
        ));
    }
    if min == 0.0 {
        Ok(Rho::Infinite)
    } else {
        Ok(Rho::Finite(max / min))
    }
}

/// Sparse compatibility profile: r -> upper bound on f(v)/||v||_2 over
/// r-sparse v.
#[derive(Debug, Clone, PartialEq)]
enum PhiProfile {
    /// sqrt(r) (l1 and all-ones OWL).
    SqrtR,
    /// Constant 1 (l2).
    One,
    /// sqrt(2) * max(1, sqrt(r/k)), from the elastic-net style envelope.
    KSupport { k: usize },
    /// l2 norm of the first r weights.
    OwlPrefix { prefix_l2: Vec<f64> },
    /// sqrt(min(r, k)).
    KyFan { k: usize },
}

/// Structural constants of a gauge: envelope coefficients eta1/eta2 with
/// f(v) <= max(eta1 ||v||_1, eta2 ||v||_2), the lower coefficient nu with
/// f(v) >= nu ||v||_1, and the sparse compatibility profile phi.
#[derive(Debug, Clone, PartialEq)]
pub struct GaugeConstants {
    pub eta1: f64,
    pub eta2: f64,
    pub nu: f64,
    phi: PhiProfile,
}

impl GaugeConstants {
    /// Upper bound on f(v)/||v||_2 over vectors with at most `r` nonzeros.
    pub fn phi(&self, r: usize) -> f64 {
        let rf = r as f64;
        match &self.phi {
            PhiProfile::SqrtR => rf.sqrt(),
            PhiProfile::One => 1.0,
            PhiProfile::KSupport { k } => {
                let kf = *k as f64;
                std::f64::consts::SQRT_2 * (rf / kf).sqrt().max(1.0)
            }
            PhiProfile::OwlPrefix { prefix_l2 } => prefix_l2[r.min(prefix_l2.len() - 1)],
            PhiProfile::KyFan { k } => (rf.min(*k as f64)).sqrt(),
        }
    }
}

/// JSON-facing description of a gauge, e.g.
/// `{"kind": "ksupport", "k": 3, "dim": 20}`.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum GaugeDescriptor {
    L1 { dim: usize },
    L2 { dim: usize },
    Owl { dim: usize, weights: Vec<f64> },
    KSupport { dim: usize, k: usize },
    KyFan { dim: usize, k: usize },
}

impl TryFrom<GaugeDescriptor> for Gauge {
    type Error = GdsError;

    fn try_from(d: GaugeDescriptor) -> Result<Gauge> {
        match d {
            GaugeDescriptor::L1 { dim } => Gauge::l1(dim),
            GaugeDescriptor::L2 { dim } => Gauge::l2(dim),
            GaugeDescriptor::Owl { dim, weights } => {
                if weights.len() != dim {
                    return Err(GdsError::DimensionMismatch {
                        expected: dim,
                        got: weights.len(),
                    });
                }
                Gauge::owl(DVector::from_vec(weights))
            }
            GaugeDescriptor::KSupport { dim, k } => Gauge::k_support(dim, k),
            GaugeDescriptor::KyFan { dim, k } => Gauge::ky_fan(dim, k),
        }
    }
}

impl From<&Gauge> for GaugeDescriptor {
    fn from(g: &Gauge) -> GaugeDescriptor {
        match &g.kind {
            GaugeKind::L1 => GaugeDescriptor::L1 { dim: g.dim },
            GaugeKind::L2 => GaugeDescriptor::L2 { dim: g.dim },
            GaugeKind::Owl(w) => GaugeDescriptor::Owl {
                dim: g.dim,
                weights: w.iter().copied().collect(),
            },
            GaugeKind::KSupport(k) => GaugeDescriptor::KSupport { dim: g.dim, k: *k },
            GaugeKind::KyFan(k) => GaugeDescriptor::KyFan { dim: g.dim, k: *k },
        }
    }
}

impl Gauge {
    pub fn l1(dim: usize) -> Result<Self> {
        Self::check_dim(dim)?;
        Ok(Gauge {
            kind: GaugeKind::L1,
            dim,
        })
    }

    pub fn l2(dim: usize) -> Result<Self> {
        Self::check_dim(dim)?;
        Ok(Gauge {
            kind: GaugeKind::L2,
            dim,
        })
    }

    /// OWL gauge. Weights are canonicalized to |w| sorted descending (the
    /// evaluation only ever sees them in that order); the all-zero weight
    /// vector is rejected since it gives no norm.
    pub fn owl(weights: DVector<f64>) -> Result<Self> {
        let dim = weights.len();
        Self::check_dim(dim)?;
        if weights.iter().any(|w| w.is_nan()) {
            return Err(GdsError::InvalidGauge("OWL weights contain NaN".into()));
        }
        let (sorted, _) = abs_sorted_desc(&weights);
        if sorted[0] == 0.0 {
            return Err(GdsError::InvalidGauge("OWL weights are all zero".into()));
        }
        Ok(Gauge {
            kind: GaugeKind::Owl(DVector::from_vec(sorted)),
            dim,
        })
    }

    pub fn k_support(dim: usize, k: usize) -> Result<Self> {
        Self::check_dim(dim)?;
        Self::check_k(dim, k)?;
        Ok(Gauge {
            kind: GaugeKind::KSupport(k),
            dim,
        })
    }

    pub fn ky_fan(dim: usize, k: usize) -> Result<Self> {
        Self::check_dim(dim)?;
        Self::check_k(dim, k)?;
        Ok(Gauge {
            kind: GaugeKind::KyFan(k),
            dim,
        })
    }

    fn check_dim(dim: usize) -> Result<()> {
        if dim == 0 {
            return Err(GdsError::InvalidGauge("dimension must be positive".into()));
        }
        Ok(())
    }

    fn check_k(dim: usize, k: usize) -> Result<()> {
        if k == 0 || k > dim {
            return Err(GdsError::InvalidGauge(format!(
                "k must satisfy 1 <= k <= dim, got k={k}, dim={dim}"
            )));
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn kind(&self) -> &GaugeKind {
        &self.kind
    }

    /// Whether `prox` is implemented for this gauge.
    pub fn supports_prox(&self) -> bool {
        !matches!(self.kind, GaugeKind::KyFan(_))
    }

    fn check_len(&self, v: &DVector<f64>) -> Result<()> {
        if v.len() != self.dim {
            return Err(GdsError::DimensionMismatch {
                expected: self.dim,
                got: v.len(),
            });
        }
        Ok(())
    }

    /// f(v).
    pub fn eval(&self, v: &DVector<f64>) -> Result<f64> {
        self.check_len(v)?;
        Ok(match &self.kind {
            GaugeKind::L1 => v.iter().map(|x| x.abs()).sum(),
            GaugeKind::L2 => v.norm(),
            GaugeKind::Owl(w) => {
                let (z, _) = abs_sorted_desc(v);
                z.iter().zip(w.iter()).map(|(a, b)| a * b).sum()
            }
            GaugeKind::KSupport(k) => {
                let (z, _) = abs_sorted_desc(v);
                k_support_eval_sorted(&z, *k)
            }
            GaugeKind::KyFan(k) => {
                let (z, _) = abs_sorted_desc(v);
                z.iter().take(*k).sum()
            }
        })
    }

    /// f*(v) = sup { <x, v> : f(x) <= 1 }.
    pub fn dual_eval(&self, v: &DVector<f64>) -> Result<f64> {
        self.check_len(v)?;
        Ok(match &self.kind {
            GaugeKind::L1 => v.iter().fold(0.0_f64, |m, x| m.max(x.abs())),
            GaugeKind::L2 => v.norm(),
            GaugeKind::Owl(w) => {
                // max over j of (sum of j largest |v|) / (sum of j largest w);
                // the dual ball's extreme points are uniform prefix blocks.
                let (z, _) = abs_sorted_desc(v);
                let mut best = 0.0_f64;
                let (mut sz, mut sw) = (0.0, 0.0);
                for j in 0..z.len() {
                    sz += z[j];
                    sw += w[j];
                    if sw > 0.0 {
                        best = best.max(sz / sw);
                    }
                }
                best
            }
            GaugeKind::KSupport(k) => {
                let (z, _) = abs_sorted_desc(v);
                z.iter().take(*k).map(|x| x * x).sum::<f64>().sqrt()
            }
            GaugeKind::KyFan(k) => {
                let (z, _) = abs_sorted_desc(v);
                let linf = if z.is_empty() { 0.0 } else { z[0] };
                let l1: f64 = z.iter().sum();
                linf.max(l1 / *k as f64)
            }
        })
    }

    /// argmin_x 1/2 ||x - v||^2 + t f(x). Not available for Ky Fan.
    pub fn prox(&self, v: &DVector<f64>, t: f64) -> Result<DVector<f64>> {
        self.check_len(v)?;
        if t <= 0.0 {
            return Err(GdsError::InvalidArgument(format!(
                "prox step must be positive, got {t}"
            )));
        }
        match &self.kind {
            GaugeKind::L1 => Ok(v.map(|x| soft_threshold(x, t))),
            GaugeKind::L2 => {
                let n = v.norm();
                if n <= t {
                    Ok(DVector::zeros(self.dim))
                } else {
                    Ok(v * (1.0 - t / n))
                }
            }
            GaugeKind::Owl(w) => {
                let (z, perm) = abs_sorted_desc(v);
                let shifted: Vec<f64> = z.iter().zip(w.iter()).map(|(a, b)| a - t * b).collect();
                let fitted = pava_nonincreasing(&shifted);
                let mut out = DVector::zeros(self.dim);
                for (rank, &i) in perm.iter().enumerate() {
                    out[i] = v[i].signum() * fitted[rank].max(0.0);
                }
                Ok(out)
            }
            GaugeKind::KSupport(k) => {
                // Moreau: prox of t f = identity minus projection onto
                // { x : f*(x) <= t }, and f* is the l2 norm of the k
                // largest magnitudes.
                let proj = project_topk_l2_ball(v, *k, t);
                Ok(v - proj)
            }
            GaugeKind::KyFan(_) => Err(GdsError::Unsupported(
                "prox of the Ky Fan gauge (evaluation/dual only)".into(),
            )),
        }
    }

    /// Polar operator: a maximizer of <x, sigma> over the dual unit ball,
    /// returned nonnegative and descending. `sigma` must be nonnegative
    /// descending. When the maximizer is not unique the maximal-support
    /// canonical representative is returned.
    pub fn polar(&self, sigma: &DVector<f64>) -> Result<DVector<f64>> {
        self.check_len(sigma)?;
        if !is_nonneg_descending(sigma) {
            return Err(GdsError::InvalidArgument(
                "polar expects a nonnegative descending vector".into(),
            ));
        }
        let d = self.dim;
        Ok(match &self.kind {
            GaugeKind::L1 => DVector::from_element(d, 1.0),
            GaugeKind::L2 => {
                let n = sigma.norm();
                if n == 0.0 {
                    DVector::from_element(d, 1.0 / (d as f64).sqrt())
                } else {
                    sigma / n
                }
            }
            GaugeKind::Owl(w) => w.clone(),
            GaugeKind::KSupport(k) => k_support_polar(sigma, *k),
            GaugeKind::KyFan(k) => {
                let mut out = DVector::zeros(d);
                for i in 0..*k {
                    out[i] = 1.0;
                }
                out
            }
        })
    }

    /// Structural constants used by the geometric bounds.
    pub fn constants(&self) -> GaugeConstants {
        let c = match &self.kind {
            GaugeKind::L1 => GaugeConstants {
                eta1: 1.0,
                eta2: 0.0,
                nu: 1.0,
                phi: PhiProfile::SqrtR,
            },
            GaugeKind::L2 => GaugeConstants {
                eta1: 0.0,
                eta2: 1.0,
                nu: 1.0 / (self.dim as f64).sqrt(),
                phi: PhiProfile::One,
            },
            GaugeKind::Owl(w) => {
                let mut prefix = Vec::with_capacity(self.dim + 1);
                prefix.push(0.0);
                let mut acc = 0.0;
                for wi in w.iter() {
                    acc += wi * wi;
                    prefix.push(acc.sqrt());
                }
                GaugeConstants {
                    eta1: w[0],
                    eta2: 0.0,
                    // Chebyshev's sum inequality makes the mean weight the
                    // exact lower l1 coefficient.
                    nu: w.sum() / self.dim as f64,
                    phi: PhiProfile::OwlPrefix { prefix_l2: prefix },
                }
            }
            GaugeKind::KSupport(k) => GaugeConstants {
                eta1: (2.0 / *k as f64).sqrt(),
                eta2: std::f64::consts::SQRT_2,
                nu: 1.0 / (*k as f64).sqrt(),
                phi: PhiProfile::KSupport { k: *k },
            },
            GaugeKind::KyFan(k) => GaugeConstants {
                eta1: 0.0,
                eta2: (*k as f64).sqrt(),
                nu: *k as f64 / self.dim as f64,
                phi: PhiProfile::KyFan { k: *k },
            },
        };
        debug_assert!(
            self.spot_check_constants(&c, 32, 0x5eed).is_ok(),
            "gauge constants failed their sampling self-check"
        );
        c
    }

    /// Random-sampling check of the constants' defining inequalities.
    pub fn spot_check_constants(
        &self,
        c: &GaugeConstants,
        samples: usize,
        seed: u64,
    ) -> Result<()> {
        use rand::Rng;
        let mut rng = crate::util::stream_rng(seed, 0);
        let tol = 1e-9;
        for _ in 0..samples {
            let v = DVector::from_fn(self.dim, |_, _| rng.gen_range(-1.0..1.0));
            let f = self.eval(&v)?;
            let l1: f64 = v.iter().map(|x| x.abs()).sum();
            let l2 = v.norm();
            let envelope = (c.eta1 * l1).max(c.eta2 * l2);
            if f > envelope * (1.0 + tol) {
                return Err(GdsError::InvalidGauge(format!(
                    "envelope violated: f={f} > max(eta1 l1, eta2 l2)={envelope}"
                )));
            }
            if f < c.nu * l1 * (1.0 - tol) {
                return Err(GdsError::InvalidGauge(format!(
                    "lower l1 bound violated: f={f} < nu*l1={}",
                    c.nu * l1
                )));
            }
            // Sparse check at a random sparsity level.
            let r = rng.gen_range(1..=self.dim);
            let mut s = DVector::zeros(self.dim);
            for i in 0..r {
                s[i] = rng.gen_range(-1.0..1.0);
            }
            let fs = self.eval(&s)?;
            if fs > c.phi(r) * s.norm() * (1.0 + tol) {
                return Err(GdsError::InvalidGauge(format!(
                    "sparse compatibility violated at r={r}: f={fs} > {}",
                    c.phi(r) * s.norm()
                )));
            }
        }
        Ok(())
    }
}

fn soft_threshold(x: f64, t: f64) -> f64 {
    if x > t {
        x - t
    } else if x < -t {
        x + t
    } else {
        0.0
    }
}

/// k-support norm of a vector already sorted by descending magnitude.
/// Closed form: find the split r in {0..k-1} between the quadratic head and
/// the averaged tail, with z_0 treated as +inf:
///   z_{k-r-1} > (sum_{i=k-r..d} z_i)/(r+1) >= z_{k-r}
/// then f^2 = sum_{i<=k-r-1} z_i^2 + (tail sum)^2/(r+1).
fn k_support_eval_sorted(z: &[f64], k: usize) -> f64 {
    let d = z.len();
    let mut prefix = vec![0.0_f64; d + 1];
    for i in 0..d {
        prefix[i + 1] = prefix[i] + z[i];
    }
    let zz = |i: usize| -> f64 {
        if i == 0 {
            f64::INFINITY
        } else {
            z[i - 1]
        }
    };
    let total = prefix[d];
    // The value is continuous in r across both boundary conditions, so a
    // small comparison slack (needed against prefix-sum cancellation) cannot
    // change the result beyond second order.
    let slack = 1e-9 * total.max(1.0);
    let mut chosen = k - 1;
    for r in 0..k {
        let m = k - r - 1; // head length
        let tail = total - prefix[m];
        let avg = tail / (r + 1) as f64;
        let right = if m < d { zz(m + 1) } else { 0.0 };
        if zz(m) + slack > avg && avg + slack >= right {
            chosen = r;
            break;
        }
    }
    let m = k - chosen - 1;
    let head: f64 = z[..m].iter().map(|x| x * x).sum();
    let tail = total - prefix[m];
    (head + tail * tail / (chosen + 1) as f64).sqrt()
}

/// Polar operator of the k-support norm at a nonnegative descending sigma.
/// Reduce to the head block: with c = (sigma_1, .., sigma_{k-1},
/// sum_{i>=k} sigma_i), the optimal head is the normalized projection of c
/// onto the descending nonnegative cone and the tail repeats its last entry
/// (the maximal-support choice).
fn k_support_polar(sigma: &DVector<f64>, k: usize) -> DVector<f64> {
    let d = sigma.len();
    if sigma[0] == 0.0 {
        return DVector::from_element(d, 1.0 / (k as f64).sqrt());
    }
    let mut c = vec![0.0_f64; k];
    for i in 0..k - 1 {
        c[i] = sigma[i];
    }
    c[k - 1] = sigma.iter().skip(k - 1).sum();
    let mut q: Vec<f64> = pava_nonincreasing(&c).iter().map(|x| x.max(0.0)).collect();
    let norm = q.iter().map(|x| x * x).sum::<f64>().sqrt();
    for x in q.iter_mut() {
        *x /= norm;
    }
    let mut out = DVector::zeros(d);
    for i in 0..k {
        out[i] = q[i];
    }
    for i in k..d {
        out[i] = q[k - 1];
    }
    out
}

/// Euclidean projection onto { x : l2 norm of the k largest |x_i| <= t }.
///
/// Reduces to the sorted nonnegative frame, where the multiplier problem
/// prox_{lam * q} with q = 1/2 (top-k sum of squares) has a waterfilling
/// solution: a shrunk head y_i = z_i / (1 + lam), a tied block at level T
/// straddling position k, and an untouched tail. An outer bisection on lam
/// enforces the ball radius.
fn project_topk_l2_ball(v: &DVector<f64>, k: usize, t: f64) -> DVector<f64> {
    let d = v.len();
    let (z, perm) = abs_sorted_desc(v);
    let topk = |y: &[f64]| -> f64 { y[..k].iter().map(|x| x * x).sum::<f64>().sqrt() };
    if topk(&z) <= t {
        return v.clone();
    }

    let solve_inner = |lam: f64| -> Vec<f64> { topk_quadratic_prox(&z, k, lam) };

    // Bracket the multiplier, then bisect on the achieved radius.
    let mut lo = 0.0_f64;
    let mut hi = (topk(&z) / t).max(1.0);
    for _ in 0..200 {
        if topk(&solve_inner(hi)) < t {
            break;
        }
        hi *= 2.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        let r = topk(&solve_inner(mid));
        if r > t {
            lo = mid;
        } else {
            hi = mid;
        }
        if (hi - lo) <= 1e-15 * hi.max(1.0) {
            break;
        }
    }
    let y = solve_inner(0.5 * (lo + hi));

    let mut out = DVector::zeros(d);
    for (rank, &i) in perm.iter().enumerate() {
        out[i] = v[i].signum() * y[rank];
    }
    out
}

/// argmin_y 1/2 ||y - z||^2 + lam * 1/2 * (sum of squares of the k largest
/// y_i), for z sorted descending nonnegative. Returns y in the same frame.
fn topk_quadratic_prox(z: &[f64], k: usize, lam: f64) -> Vec<f64> {
    let d = z.len();
    if lam == 0.0 {
        return z.to_vec();
    }
    // No-tie candidate: shrink the head, keep the tail.
    let head_ok = {
        let boundary = z[k - 1] / (1.0 + lam);
        let next = if k < d { z[k] } else { 0.0 };
        boundary >= next
    };
    if head_ok {
        let mut y = z.to_vec();
        for item in y.iter_mut().take(k) {
            *item /= 1.0 + lam;
        }
        return y;
    }
    // Tied block spanning [a+1, b] (1-based) at level T with fractional
    // top-k membership; enumerate the block boundaries.
    let mut prefix = vec![0.0_f64; d + 1];
    for i in 0..d {
        prefix[i + 1] = prefix[i] + z[i];
    }
    let eps = 1e-12;
    for a in (0..k).rev() {
        for b in k..=d {
            let s_ab = prefix[b] - prefix[a];
            let denom = (b - a) as f64 + lam * (k - a) as f64;
            let level = s_ab / denom;
            if level < 0.0 {
                continue;
            }
            let head_ok = a == 0 || z[a - 1] >= level * (1.0 + lam) * (1.0 - eps);
            let first_ok = z[a] <= level * (1.0 + lam) * (1.0 + eps);
            let last_ok = z[b - 1] >= level * (1.0 - eps);
            let tail_ok = b == d || z[b] <= level * (1.0 + eps);
            if head_ok && first_ok && last_ok && tail_ok {
                let mut y = z.to_vec();
                for item in y.iter_mut().take(a) {
                    *item /= 1.0 + lam;
                }
                for item in y.iter_mut().take(b).skip(a) {
                    *item = level;
                }
                return y;
            }
        }
    }
    // Consistent block always exists; reaching here means fp ties defeated
    // the tolerance. Fall back to the full-block solution.
    let s = prefix[d];
    let level = s / (d as f64 + lam * k as f64);
    vec![level.max(0.0); d]
}
