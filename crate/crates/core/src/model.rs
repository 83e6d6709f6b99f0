//! Data-generating process and learning filters.
//!
//! The model is a linear regression whose regressor is a forecast state
//! updated by a decreasing-gain stochastic-approximation step:
//!
//! ```text
//! y_t = delta0 + beta0 * a_{t-1} + eps_t,
//! a_t = a_{t-1} + (theta0 / t) * (y_t - a_{t-1}),      a_0 = a_init,
//! z_t = a_{t-1} + u_t,
//! ```
//!
//! so the state contracts toward the fixed point alpha0 = delta0/(1-beta0).
//! The filters below rerun the recursion at a candidate gain, with arbitrary
//! or pinned initial values, together with the analytic theta-derivatives of
//! the filtered path.

use crate::error::{Error, Result};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rand_distr::StandardNormal;

/// Admissible gain interval. Estimation and filtering require 1 < lo < hi.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThetaBounds {
    pub lo: f64,
    pub hi: f64,
}

impl ThetaBounds {
    pub fn new(lo: f64, hi: f64) -> Result<Self> {
        if !(lo > 1.0 && lo < hi && hi.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "gain bounds must satisfy 1 < lo < hi < inf, got [{lo}, {hi}]"
            )));
        }
        Ok(ThetaBounds { lo, hi })
    }

    pub fn contains(&self, theta: f64) -> bool {
        theta >= self.lo && theta <= self.hi
    }

    fn check(&self, theta: f64) -> Result<()> {
        if !self.contains(theta) {
            return Err(Error::Domain(format!(
                "theta = {theta} outside [{}, {}]",
                self.lo, self.hi
            )));
        }
        Ok(())
    }
}

/// True model parameters plus the admissible gain interval.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelParams {
    pub theta0: f64,
    pub beta0: f64,
    pub delta0: f64,
    pub sigma_eps: f64,
    pub sigma_u: f64,
    /// Initial learning state a_0.
    pub a_init: f64,
    pub theta_lo: f64,
    pub theta_hi: f64,
}

impl ModelParams {
    pub fn new(
        theta0: f64,
        beta0: f64,
        delta0: f64,
        sigma_eps: f64,
        sigma_u: f64,
        a_init: f64,
        theta_lo: f64,
        theta_hi: f64,
    ) -> Result<Self> {
        let p = ModelParams {
            theta0,
            beta0,
            delta0,
            sigma_eps,
            sigma_u,
            a_init,
            theta_lo,
            theta_hi,
        };
        p.validate()?;
        Ok(p)
    }

    /// Checks the identification region: 1 < theta_lo < theta0 < theta_hi,
    /// theta0*(1-beta0) > 1/2, beta0 < 1, positive noise scales.
    pub fn validate(&self) -> Result<()> {
        ThetaBounds::new(self.theta_lo, self.theta_hi)?;
        if !(self.theta0 > self.theta_lo && self.theta0 < self.theta_hi) {
            return Err(Error::InvalidParameter(format!(
                "theta0 = {} not interior to [{}, {}]",
                self.theta0, self.theta_lo, self.theta_hi
            )));
        }
        if !(self.beta0 < 1.0) {
            return Err(Error::InvalidParameter(format!("beta0 = {} >= 1", self.beta0)));
        }
        if !(self.theta0 * (1.0 - self.beta0) > 0.5) {
            return Err(Error::InvalidParameter(format!(
                "theta0*(1-beta0) = {} <= 1/2",
                self.theta0 * (1.0 - self.beta0)
            )));
        }
        if !(self.sigma_eps > 0.0) || !(self.sigma_u > 0.0) {
            return Err(Error::InvalidParameter(
                "noise standard deviations must be positive".into(),
            ));
        }
        for (name, v) in [
            ("theta0", self.theta0),
            ("beta0", self.beta0),
            ("delta0", self.delta0),
            ("a_init", self.a_init),
        ] {
            if !v.is_finite() {
                return Err(Error::InvalidParameter(format!("{name} is not finite")));
            }
        }
        Ok(())
    }

    /// Fixed point of the learning recursion, alpha0 = delta0 / (1 - beta0).
    pub fn alpha0(&self) -> f64 {
        self.delta0 / (1.0 - self.beta0)
    }

    /// c0 = 1 - beta0.
    pub fn c0(&self) -> f64 {
        1.0 - self.beta0
    }

    pub fn bounds(&self) -> ThetaBounds {
        ThetaBounds {
            lo: self.theta_lo,
            hi: self.theta_hi,
        }
    }

    /// The parameter point used throughout the verification suites:
    /// theta0 = 2, beta0 = 0.25, delta0 = 1, unit noise scales, a_0 = 0,
    /// gain interval [1.05, 6].
    pub fn default_point() -> Self {
        ModelParams {
            theta0: 2.0,
            beta0: 0.25,
            delta0: 1.0,
            sigma_eps: 1.0,
            sigma_u: 1.0,
            a_init: 0.0,
            theta_lo: 1.05,
            theta_hi: 6.0,
        }
    }
}

/// Reproducible substream selector: the pair (master_seed, stream_id)
/// determines the draw sequence bit-exactly, and distinct stream ids give
/// statistically independent streams.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NoiseSource {
    pub master_seed: u64,
    pub stream_id: u64,
}

fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

impl NoiseSource {
    pub fn new(master_seed: u64, stream_id: u64) -> Self {
        NoiseSource {
            master_seed,
            stream_id,
        }
    }

    /// ChaCha12 seeded by a splitmix64 expansion of (master_seed, stream_id).
    pub fn rng(&self) -> ChaCha12Rng {
        let mut state = self.master_seed;
        let k = splitmix64(&mut state);
        let mut state = k ^ self.stream_id.wrapping_mul(0xD605_BBB5_8C8A_BC03);
        let mut seed = [0u8; 32];
        for chunk in seed.chunks_exact_mut(8) {
            chunk.copy_from_slice(&splitmix64(&mut state).to_le_bytes());
        }
        ChaCha12Rng::from_seed(seed)
    }
}

/// One simulated trajectory. `a` has length n+1 (slots 0..=n); the
/// observables have length n with slot t-1 holding period t.
#[derive(Debug, Clone, PartialEq)]
pub struct SimPath {
    pub n: usize,
    pub eps: Vec<f64>,
    pub u: Vec<f64>,
    pub a: Vec<f64>,
    pub y: Vec<f64>,
    pub z: Vec<f64>,
}

/// Builds a path from caller-supplied innovation arrays. This is the hook for
/// non-Gaussian error processes: anything satisfying the moment conditions
/// can be passed here.
pub fn simulate_from_innovations(params: &ModelParams, eps: &[f64], u: &[f64]) -> Result<SimPath> {
    params.validate()?;
    let n = eps.len();
    if n == 0 {
        return Err(Error::Domain("sample size must be at least 1".into()));
    }
    if u.len() != n {
        return Err(Error::Domain(format!(
            "innovation arrays disagree in length: {} vs {}",
            n,
            u.len()
        )));
    }
    let mut a = Vec::with_capacity(n + 1);
    let mut y = Vec::with_capacity(n);
    let mut z = Vec::with_capacity(n);
    a.push(params.a_init);
    for t in 1..=n {
        let prev = a[t - 1];
        let yt = params.delta0 + params.beta0 * prev + eps[t - 1];
        z.push(prev + u[t - 1]);
        a.push(prev + params.theta0 / t as f64 * (yt - prev));
        y.push(yt);
    }
    Ok(SimPath {
        n,
        eps: eps.to_vec(),
        u: u.to_vec(),
        a,
        y,
        z,
    })
}

/// Simulates a path of length n with i.i.d. Gaussian innovations drawn from
/// the given substream. eps_t and u_t are drawn interleaved per period, so a
/// shorter path on the same stream is a prefix of a longer one.
pub fn simulate_path(params: &ModelParams, n: usize, noise: NoiseSource) -> Result<SimPath> {
    params.validate()?;
    if n == 0 {
        return Err(Error::Domain("sample size must be at least 1".into()));
    }
    let mut rng = noise.rng();
    let mut eps = Vec::with_capacity(n);
    let mut u = Vec::with_capacity(n);
    for _ in 0..n {
        let e: f64 = rng.sample(StandardNormal);
        let v: f64 = rng.sample(StandardNormal);
        eps.push(params.sigma_eps * e);
        u.push(params.sigma_u * v);
    }
    simulate_from_innovations(params, &eps, &u)
}

/// Reruns the learning recursion at a candidate gain from an arbitrary start:
/// out[0] = a_start, out[t] = out[t-1] + (theta/t)(y_t - out[t-1]).
pub fn filter_candidate(
    theta: f64,
    bounds: ThetaBounds,
    a_start: f64,
    y: &[f64],
) -> Result<Vec<f64>> {
    bounds.check(theta)?;
    if y.is_empty() {
        return Err(Error::Domain("candidate filter needs a nonempty sample".into()));
    }
    let mut out = Vec::with_capacity(y.len() + 1);
    out.push(a_start);
    for (t, &yt) in y.iter().enumerate() {
        let prev = out[t];
        out.push(prev + theta / (t + 1) as f64 * (yt - prev));
    }
    Ok(out)
}

/// Initial-value-free representation of the filtered path:
/// out[t] = alpha0 + sum_{s<=t} g_{s,t}(theta) (y_s - alpha0) for t >= 1.
/// Slot 0 stores the caller-supplied a_start; it never feeds slots >= 1.
pub fn filter_dagger(
    theta: f64,
    bounds: ThetaBounds,
    alpha0: f64,
    a_start: f64,
    y: &[f64],
) -> Result<Vec<f64>> {
    bounds.check(theta)?;
    if y.is_empty() {
        return Err(Error::Domain("dagger filter needs a nonempty sample".into()));
    }
    // The weighted sum telescopes into the same recursion started at alpha0.
    let mut out = Vec::with_capacity(y.len() + 1);
    out.push(a_start);
    let mut cur = alpha0;
    for (t, &yt) in y.iter().enumerate() {
        cur += theta / (t + 1) as f64 * (yt - cur);
        out.push(cur);
    }
    Ok(out)
}

/// Filtered path and its analytic theta-derivatives under the dagger
/// convention (the path depends on theta only through the g weights, so all
/// derivative states start at zero).
#[derive(Debug, Clone)]
pub struct FilterDerivatives {
    /// Dagger-filtered level path, slots 0..=n with slot 0 = alpha0.
    pub level: Vec<f64>,
    /// deriv[m-1][t] = d^m a_t(theta) / d theta^m, slots 0..=n.
    pub deriv: Vec<Vec<f64>>,
}

/// Differentiated recursion:
/// a^(1)_t = a^(1)_{t-1} (1 - theta/t) + (1/t)(y_t - a_{t-1}),
/// a^(m)_t = a^(m)_{t-1} (1 - theta/t) - (m/t) a^(m-1)_{t-1}.
pub fn filter_derivatives(
    theta: f64,
    bounds: ThetaBounds,
    alpha0: f64,
    y: &[f64],
    max_order: usize,
) -> Result<FilterDerivatives> {
    bounds.check(theta)?;
    if !(1..=4).contains(&max_order) {
        return Err(Error::Domain(format!(
            "derivative order {max_order} not in 1..=4"
        )));
    }
    if y.is_empty() {
        return Err(Error::Domain("derivative filter needs a nonempty sample".into()));
    }
    let n = y.len();
    let mut level = Vec::with_capacity(n + 1);
    level.push(alpha0);
    let mut deriv = vec![Vec::with_capacity(n + 1); max_order];
    for d in deriv.iter_mut() {
        d.push(0.0);
    }
    for (i, &yt) in y.iter().enumerate() {
        let t = (i + 1) as f64;
        let shrink = 1.0 - theta / t;
        let prev_level = level[i];
        for m in (0..max_order).rev() {
            let prev_m = deriv[m][i];
            let next = if m == 0 {
                prev_m * shrink + (yt - prev_level) / t
            } else {
                prev_m * shrink - (m + 1) as f64 / t * deriv[m - 1][i]
            };
            deriv[m].push(next);
        }
        level.push(prev_level + theta / t * (yt - prev_level));
    }
    Ok(FilterDerivatives { level, deriv })
}
