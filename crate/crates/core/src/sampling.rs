//! Haar-uniform rotations by rejection sampling on `S³`, random deformation
//! gradients and the Monte Carlo check of global optimality.
//!
//! All randomness comes from ChaCha8 streams. Each validation case owns a
//! generator seeded with [`mix_seed`]`(seed, case_index)`, so reports do not
//! depend on the number of worker threads.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::energy::{energy_unchecked, MaterialParams};
use crate::error::{Error, Result};
use crate::relax::{classify_sigma, relaxed_polar, Domain};
use crate::rotcore::{
    covering_map, geodesic_angle, svd_ordered, to_rows, Mat3, Quat, UnitQuaternion, EPS_DET,
    EPS_GAP_REL,
};

/// Rejected proposals after which [`sample_f`] gives up.
pub const MAX_F_REJECTIONS: usize = 1_000_000;
/// Size of the quaternion set used in the original experiments.
pub const FULL_SCALE_SAMPLES: usize = 4_629_171;
pub const FULL_SCALE_CASES: usize = 1000;
/// Sample count from which the Frobenius tolerance is enforced.
pub const TOL_ENFORCED_FROM: usize = 4_000_000;
pub const DEFAULT_TOL: f64 = 1e-4;
/// Lower-bound slack on `min sampled energy − reduced energy`.
pub const GAP_FLOOR: f64 = -1e-9;
/// Geodesic threshold on the arg-min at desk scale.
pub const DESK_ANGLE_THRESHOLD: f64 = 0.2;

/// Half-width of the coefficient range for classical parameters, where the
/// singular radius is infinite.
pub const CLASSICAL_HALF_WIDTH: f64 = 2.0;

/// Seeded ChaCha8 stream.
#[derive(Debug, Clone)]
pub struct RngState {
    seed: u64,
    rng: ChaCha8Rng,
}

impl RngState {
    pub fn new(seed: u64) -> Self {
        RngState {
            seed,
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Uniform draw from `[lo, hi]`.
    pub fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        self.rng.random_range(lo..=hi)
    }
}

/// SplitMix64 finalizer applied to `master + (index + 1)·γ`.
pub fn mix_seed(master: u64, index: u64) -> u64 {
    let mut z = master.wrapping_add(index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Uniform unit quaternion and the number of proposals it took.
pub fn sample_unit_quaternion_counted(rng: &mut RngState) -> (UnitQuaternion, usize) {
    let mut proposals = 0;
    loop {
        proposals += 1;
        let c: [f64; 4] = std::array::from_fn(|_| rng.uniform(-1.0, 1.0));
        let n2 = c.iter().map(|v| v * v).sum::<f64>();
        if n2 > 1.0 || n2 == 0.0 {
            continue;
        }
        let q = UnitQuaternion::new_normalize(Quat::from_array(c)).expect("nonzero proposal");
        return (q, proposals);
    }
}

/// Uniform point on `S³`: uniform in `[−1, 1]⁴`, rejected outside the unit
/// ball, normalized.
pub fn sample_unit_quaternion(rng: &mut RngState) -> UnitQuaternion {
    sample_unit_quaternion_counted(rng).0
}

/// Haar-uniform rotation.
pub fn sample_rotation(rng: &mut RngState) -> Mat3 {
    sample_unit_quaternion(rng).to_rotation()
}

/// Coefficient half-width `ρ/2`, or [`CLASSICAL_HALF_WIDTH`] when `ρ = ∞`.
pub fn f_half_width(p: &MaterialParams) -> f64 {
    p.rho.finite().map_or(CLASSICAL_HALF_WIDTH, |rho| 0.5 * rho)
}

/// Rejection counters of [`sample_f_with_stats`].
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FSampleStats {
    pub proposals: usize,
    pub rejected_det: usize,
    pub rejected_gap: usize,
    /// Admissible proposals that landed in the classical domain.
    pub landed_classical: usize,
    pub landed_nonclassical: usize,
    pub landed_boundary: usize,
}

impl FSampleStats {
    fn add(&mut self, o: &FSampleStats) {
        self.proposals += o.proposals;
        self.rejected_det += o.rejected_det;
        self.rejected_gap += o.rejected_gap;
        self.landed_classical += o.landed_classical;
        self.landed_nonclassical += o.landed_nonclassical;
        self.landed_boundary += o.landed_boundary;
    }

    /// Fraction of admissible proposals in the non-classical domain.
    pub fn nonclassical_fraction(&self) -> f64 {
        let n = self.landed_classical + self.landed_nonclassical + self.landed_boundary;
        if n == 0 {
            0.0
        } else {
            self.landed_nonclassical as f64 / n as f64
        }
    }
}

/// Random `F` with uniform coefficients in `[−w, w]`, `w = ρ/2`, positive
/// determinant, distinct singular values and the wanted domain.
pub fn sample_f_with_stats(
    rng: &mut RngState,
    p: &MaterialParams,
    want: Domain,
) -> Result<(Mat3, FSampleStats)> {
    if want == Domain::Boundary {
        return Err(Error::InvalidArgument(
            "cannot sample the domain boundary".into(),
        ));
    }
    if want == Domain::NonClassical && p.is_classical() {
        return Err(Error::ClassicalRegime);
    }
    let w = f_half_width(p);
    let mut stats = FSampleStats::default();
    let mut rejected = 0;
    loop {
        if rejected >= MAX_F_REJECTIONS {
            return Err(Error::ExhaustedAttempts(rejected));
        }
        stats.proposals += 1;
        let f = Mat3::from_fn(|_, _| rng.uniform(-w, w));
        if !(f.determinant() > EPS_DET) {
            stats.rejected_det += 1;
            rejected += 1;
            continue;
        }
        let dec = svd_ordered(&f)?;
        let eps = EPS_GAP_REL * dec.sigma[0];
        if dec.gaps[0] < eps || dec.gaps[1] < eps {
            stats.rejected_gap += 1;
            rejected += 1;
            continue;
        }
        let domain = classify_sigma(&dec.sigma, p);
        match domain {
            Domain::Classical => stats.landed_classical += 1,
            Domain::NonClassical => stats.landed_nonclassical += 1,
            Domain::Boundary => stats.landed_boundary += 1,
        }
        if domain == want {
            return Ok((f, stats));
        }
        rejected += 1;
    }
}

pub fn sample_f(rng: &mut RngState, p: &MaterialParams, want: Domain) -> Result<Mat3> {
    Ok(sample_f_with_stats(rng, p, want)?.0)
}

/// Monte Carlo evidence for one deformation gradient.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaseRecord {
    pub index: usize,
    pub sub_seed: u64,
    /// Row-major coefficients.
    pub f: [[f64; 3]; 3],
    pub sigma: [f64; 3],
    pub domain: Domain,
    pub beta_hat: f64,
    pub w_red: f64,
    pub min_sampled_energy: f64,
    /// `min_sampled_energy − w_red`.
    pub energy_gap: f64,
    pub argmin: Quat,
    pub nearest_geodesic_angle: f64,
    pub nearest_frobenius: f64,
    pub pass: bool,
}

/// Source of the sampled quaternions.
pub enum QuaternionSource<'a> {
    /// Fresh draws from the given stream.
    Fresh(&'a mut RngState),
    /// A fixed set reused across cases.
    Shared(&'a [Quat]),
}

fn scan(f: &Mat3, p: &MaterialParams, quats: impl Iterator<Item = Quat>) -> (f64, Quat) {
    let mut best = (f64::INFINITY, Quat::IDENTITY);
    for q in quats {
        let e = energy_unchecked(&covering_map(q), f, p);
        if e < best.0 {
            best = (e, q);
        }
    }
    best
}

/// Sampled minimum of `W(·; F)` against the closed-form minimizers.
///
/// A case passes when the sampled minimum does not undercut the reduced
/// energy and, if `enforce_tol`, the arg-min is within Frobenius distance
/// `tol` of `rpolar±`.
pub fn validate_case(
    f: &Mat3,
    p: &MaterialParams,
    n_samples: usize,
    tol: f64,
    enforce_tol: bool,
    source: QuaternionSource<'_>,
) -> Result<CaseRecord> {
    if n_samples == 0 {
        return Err(Error::InvalidArgument(
            "n_samples must be at least 1".into(),
        ));
    }
    let rr = relaxed_polar(f, p)?;
    let (min_e, argmin, sub_seed) = match source {
        QuaternionSource::Fresh(rng) => {
            let seed = rng.seed();
            let (e, q) = scan(
                f,
                p,
                (0..n_samples).map(|_| sample_unit_quaternion(rng).quat()),
            );
            (e, q, seed)
        }
        QuaternionSource::Shared(set) => {
            let (e, q) = scan(f, p, set.iter().take(n_samples).copied());
            (e, q, 0)
        }
    };
    let r_min = covering_map(argmin);
    let angle = geodesic_angle(&r_min, &rr.r_plus).min(geodesic_angle(&r_min, &rr.r_minus));
    let frob = (r_min - rr.r_plus).norm().min((r_min - rr.r_minus).norm());
    let gap = min_e - rr.reduced_energy;
    let pass = gap >= GAP_FLOOR && (!enforce_tol || frob < tol);
    Ok(CaseRecord {
        index: 0,
        sub_seed,
        f: to_rows(f),
        sigma: rr.decomposition.sigma,
        domain: rr.domain,
        beta_hat: rr.beta_hat,
        w_red: rr.reduced_energy,
        min_sampled_energy: min_e,
        energy_gap: gap,
        argmin: argmin.canonical(),
        nearest_geodesic_angle: angle,
        nearest_frobenius: frob,
        pass,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SamplingMode {
    /// Every case draws its own quaternions from its sub-seed.
    PerCase,
    /// One quaternion set, drawn from the master seed, shared by all cases.
    Shared,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationConfig {
    pub params: MaterialParams,
    pub n_classical: usize,
    pub n_nonclassical: usize,
    pub n_samples: usize,
    pub seed: u64,
    pub tol: f64,
    pub mode: SamplingMode,
    /// Worker threads; `0` picks the rayon default.
    #[serde(skip)]
    pub threads: usize,
}

impl ValidationConfig {
    /// Desk-scale defaults: 200 cases per domain, 10⁵ samples per case.
    pub fn desk(params: MaterialParams, seed: u64) -> Self {
        ValidationConfig {
            params,
            n_classical: 200,
            n_nonclassical: 200,
            n_samples: 100_000,
            seed,
            tol: DEFAULT_TOL,
            mode: SamplingMode::PerCase,
            threads: 0,
        }
    }

    /// Sample sizes of the original experiments.
    pub fn full_scale(params: MaterialParams, seed: u64) -> Self {
        ValidationConfig {
            n_classical: FULL_SCALE_CASES,
            n_nonclassical: FULL_SCALE_CASES,
            n_samples: FULL_SCALE_SAMPLES,
            mode: SamplingMode::Shared,
            ..ValidationConfig::desk(params, seed)
        }
    }

    pub fn enforces_tol(&self) -> bool {
        self.n_samples >= TOL_ENFORCED_FROM
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DomainSummary {
    pub n_cases: usize,
    pub failures: usize,
    pub max_gap: f64,
    pub mean_gap: f64,
    pub max_nearest_angle: f64,
    /// Fraction of cases with the arg-min within [`DESK_ANGLE_THRESHOLD`].
    pub within_angle_fraction: f64,
}

impl DomainSummary {
    fn of<'a>(records: impl Iterator<Item = &'a CaseRecord>) -> Self {
        let mut s = DomainSummary {
            n_cases: 0,
            failures: 0,
            max_gap: 0.0,
            mean_gap: 0.0,
            max_nearest_angle: 0.0,
            within_angle_fraction: 0.0,
        };
        let mut within = 0;
        for r in records {
            s.n_cases += 1;
            s.failures += usize::from(!r.pass);
            s.max_gap = s.max_gap.max(r.energy_gap);
            s.mean_gap += r.energy_gap;
            s.max_nearest_angle = s.max_nearest_angle.max(r.nearest_geodesic_angle);
            within += usize::from(r.nearest_geodesic_angle < DESK_ANGLE_THRESHOLD);
        }
        if s.n_cases > 0 {
            s.mean_gap /= s.n_cases as f64;
            s.within_angle_fraction = within as f64 / s.n_cases as f64;
        }
        s
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregates {
    pub n_cases: usize,
    pub n_samples: usize,
    pub failures: usize,
    pub min_gap: f64,
    pub max_gap: f64,
    pub max_nearest_angle: f64,
    pub classical: DomainSummary,
    pub nonclassical: DomainSummary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub params: MaterialParams,
    pub seed: u64,
    pub mode: SamplingMode,
    pub tol: f64,
    pub tol_enforced: bool,
    pub angle_threshold: f64,
    /// Set when the non-classical domain is empty for these parameters.
    pub nonclassical_skipped: bool,
    pub f_sampling: FSampleStats,
    pub records: Vec<CaseRecord>,
    pub aggregates: Aggregates,
}

/// Runs the Monte Carlo protocol: draw the `F` sets from the master seed,
/// validate every case with its own sub-seed, aggregate in case order.
pub fn run_validation(cfg: &ValidationConfig) -> Result<ValidationReport> {
    if cfg.n_samples == 0 || (cfg.n_classical == 0 && cfg.n_nonclassical == 0) {
        return Err(Error::InvalidArgument(
            "case and sample counts must be at least 1".into(),
        ));
    }
    let p = cfg.params;
    let mut master = RngState::new(cfg.seed);
    let mut stats = FSampleStats::default();
    let nonclassical_skipped = p.is_classical();
    let mut fs = Vec::new();
    for (want, n) in [
        (Domain::Classical, cfg.n_classical),
        (Domain::NonClassical, cfg.n_nonclassical),
    ] {
        if want == Domain::NonClassical && nonclassical_skipped {
            continue;
        }
        for _ in 0..n {
            let (f, s) = sample_f_with_stats(&mut master, &p, want)?;
            stats.add(&s);
            fs.push(f);
        }
    }

    let shared: Vec<Quat> = match cfg.mode {
        SamplingMode::Shared => {
            let mut rng = RngState::new(mix_seed(cfg.seed, u64::MAX));
            (0..cfg.n_samples)
                .map(|_| sample_unit_quaternion(&mut rng).quat())
                .collect()
        }
        SamplingMode::PerCase => Vec::new(),
    };
    let enforce = cfg.enforces_tol();
    let run_case = |(i, f): (usize, &Mat3)| -> Result<CaseRecord> {
        let sub_seed = mix_seed(cfg.seed, i as u64);
        let mut rng = RngState::new(sub_seed);
        let source = match cfg.mode {
            SamplingMode::PerCase => QuaternionSource::Fresh(&mut rng),
            SamplingMode::Shared => QuaternionSource::Shared(&shared),
        };
        let mut rec = validate_case(f, &p, cfg.n_samples, cfg.tol, enforce, source)?;
        rec.index = i;
        rec.sub_seed = sub_seed;
        Ok(rec)
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.threads)
        .build()
        .map_err(|e| Error::InvalidArgument(format!("thread pool: {e}")))?;
    let records: Vec<CaseRecord> = pool.install(|| {
        fs.par_iter()
            .enumerate()
            .map(run_case)
            .collect::<Result<Vec<_>>>()
    })?;

    let classical = DomainSummary::of(records.iter().filter(|r| r.domain != Domain::NonClassical));
    let nonclassical =
        DomainSummary::of(records.iter().filter(|r| r.domain == Domain::NonClassical));
    let aggregates = Aggregates {
        n_cases: records.len(),
        n_samples: cfg.n_samples,
        failures: records.iter().filter(|r| !r.pass).count(),
        min_gap: records
            .iter()
            .map(|r| r.energy_gap)
            .fold(f64::INFINITY, f64::min),
        max_gap: records
            .iter()
            .map(|r| r.energy_gap)
            .fold(f64::NEG_INFINITY, f64::max),
        max_nearest_angle: records
            .iter()
            .map(|r| r.nearest_geodesic_angle)
            .fold(0.0, f64::max),
        classical,
        nonclassical,
    };
    Ok(ValidationReport {
        params: p,
        seed: cfg.seed,
        mode: cfg.mode,
        tol: cfg.tol,
        tol_enforced: enforce,
        angle_threshold: DESK_ANGLE_THRESHOLD,
        nonclassical_skipped,
        f_sampling: stats,
        records,
        aggregates,
    })
}
