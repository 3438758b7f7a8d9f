//! Experiment suites. Each takes a validated configuration and returns a
//! report; randomness is drawn from per-purpose ChaCha streams of the seed.

use anyhow::Result;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use beltrami::{ComplexField, PeriodicGrid};

use crate::config::{ExperimentConfig, Suite};
use crate::report::Report;

pub mod caccioppoli;
pub mod counterexample;
pub mod domains;
pub mod identity;
pub mod resolvent;
pub mod weights;

pub use caccioppoli::run_caccioppoli;
pub use counterexample::run_counterexample;
pub use domains::run_domain_suite;
pub use identity::run_identity_suite;
pub use resolvent::run_resolvent_growth;
pub use weights::run_weight_scaling;

pub fn run(config: &ExperimentConfig) -> Result<Report> {
    config.validate()?;
    match config.experiment {
        Suite::Identity => run_identity_suite(config),
        Suite::Counterexample => run_counterexample(config),
        Suite::Resolvent => run_resolvent_growth(config),
        Suite::Caccioppoli => run_caccioppoli(config),
        Suite::Weights => run_weight_scaling(config),
        Suite::Domains => run_domain_suite(config),
    }
}

/// Independent stream `stream` of the configured seed.
pub(crate) fn stream(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Maps `f` over `items`, in parallel when asked; output order is the input order.
pub(crate) fn map_items<T, U, F>(parallel: bool, items: &[T], f: F) -> Result<Vec<U>>
where
    T: Sync,
    U: Send,
    F: Fn(&T) -> Result<U> + Sync + Send,
{
    if parallel {
        items.par_iter().map(&f).collect()
    } else {
        items.iter().map(f).collect()
    }
}

pub(crate) fn grid(n: usize, side: f64) -> Result<PeriodicGrid> {
    Ok(PeriodicGrid::new(n, side)?)
}

/// `(sum |v|^p h^2)^{1/p}` over the samples.
pub(crate) fn lp_norm(grid: &PeriodicGrid, values: impl Iterator<Item = f64>, p: f64) -> f64 {
    (values.map(|v| v.abs().powf(p)).sum::<f64>() * grid.cell_area()).powf(1.0 / p)
}

pub(crate) fn relative_error(a: &ComplexField, b: &ComplexField) -> Result<f64> {
    Ok(a.relative_l2_error(b)?)
}

pub(crate) fn max_of(values: impl IntoIterator<Item = f64>) -> f64 {
    values.into_iter().fold(f64::NEG_INFINITY, f64::max)
}

/// Lower bound for the norm of `solve` by probing: every probe is normalized
/// and then refined by `steps` power iterations `h <- x / ||x||`. Returns the
/// largest ratio `||x|| / ||h||` seen.
pub(crate) fn probe_norm<S, N>(
    probes: &[ComplexField],
    steps: usize,
    solve: S,
    norm: N,
) -> Result<f64>
where
    S: Fn(&ComplexField) -> Result<ComplexField>,
    N: Fn(&ComplexField) -> Result<f64>,
{
    let mut best = 0.0f64;
    for probe in probes {
        let mut h = probe.clone();
        for _ in 0..=steps {
            let hn = norm(&h)?;
            if hn == 0.0 {
                break;
            }
            let x = solve(&h)?;
            let xn = norm(&x)?;
            best = best.max(xn / hn);
            h = x.scale(beltrami::Complex64::new(1.0 / xn, 0.0));
        }
    }
    Ok(best)
}
