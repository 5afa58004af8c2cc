//! The property suite behind the `verify` subcommand.
//!
//! Checks are organized in groups, one per acceptance criterion. `--filter`
//! selects the groups whose name contains the given text.

mod adaptation;
mod convolution;
mod density;
mod transforms;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::config::ScenarioSpec;
use crate::error::{CliError, Result};
use crate::report::{Check, RunReport};

/// Inputs shared by all groups.
#[derive(Debug, Clone, Copy)]
pub struct Context {
    pub seed: u64,
}

impl Context {
    /// A generator private to `group`, so that groups stay reproducible under `--filter`.
    pub fn rng(&self, group: &str) -> ChaCha8Rng {
        let salt = group.bytes().fold(0xcbf2_9ce4_8422_2325u64, |h, b| (h ^ b as u64).wrapping_mul(0x100_0000_01b3));
        ChaCha8Rng::seed_from_u64(self.seed ^ salt)
    }
}

pub(crate) fn uniform(rng: &mut ChaCha8Rng, n: usize, lo: f64, hi: f64) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(lo..hi)).collect()
}

type GroupFn = fn(&Context) -> adaptconv::Result<Vec<Check>>;

/// A named set of checks.
pub struct Group {
    pub name: &'static str,
    /// Number of the acceptance criterion the group covers.
    pub criterion: u8,
    pub summary: &'static str,
    run: GroupFn,
}

impl Group {
    /// Runs the group; a library error becomes a single failing check.
    pub fn run(&self, ctx: &Context) -> Vec<Check> {
        match (self.run)(ctx) {
            Ok(checks) => checks,
            Err(e) => vec![Check::errored(format!("{}.error: {e}", self.name))],
        }
    }
}

pub static GROUPS: [Group; 12] = [
    Group {
        name: "calibration",
        criterion: 1,
        summary: "Gaussian calibration of the fixed-point and Wigner adaptations",
        run: adaptation::calibration,
    },
    Group { name: "axioms", criterion: 2, summary: "adaptation axioms A1 to A4", run: adaptation::axioms },
    Group {
        name: "theorem",
        criterion: 3,
        summary: "shift, multiplication and scaling identities of adaptive convolutions",
        run: adaptation::theorem,
    },
    Group {
        name: "young",
        criterion: 4,
        summary: "Young-type inequalities and kernel symmetry",
        run: convolution::young,
    },
    Group { name: "mass", criterion: 5, summary: "mass preservation for p = 1", run: convolution::mass },
    Group {
        name: "derivative",
        criterion: 6,
        summary: "derivative rule against finite differences",
        run: convolution::derivative,
    },
    Group {
        name: "continuity",
        criterion: 7,
        summary: "continuity equation for smoothed densities",
        run: convolution::continuity,
    },
    Group {
        name: "transforms",
        criterion: 8,
        summary: "Fourier, Wigner and Husimi identities",
        run: transforms::transforms,
    },
    Group {
        name: "covariance",
        criterion: 9,
        summary: "adaptations as square roots of phase-space covariances",
        run: transforms::covariance,
    },
    Group {
        name: "fixedpoint",
        criterion: 10,
        summary: "fixed-point solver convergence",
        run: adaptation::fixed_point,
    },
    Group {
        name: "differing",
        criterion: 11,
        summary: "bumps of differing variation, manual and automatic adaptation",
        run: adaptation::differing,
    },
    Group { name: "vkde", criterion: 12, summary: "variable kernel density estimation", run: density::vkde },
];

/// Groups selected by `filter`; all groups when it is `None`.
pub fn select(filter: Option<&str>) -> Result<Vec<&'static Group>> {
    let chosen: Vec<&Group> = GROUPS.iter().filter(|g| filter.is_none_or(|f| g.name.contains(f))).collect();
    if chosen.is_empty() {
        let names: Vec<&str> = GROUPS.iter().map(|g| g.name).collect();
        return Err(CliError::Config(format!(
            "filter '{}' matches no check group (groups: {})",
            filter.unwrap_or_default(),
            names.join(", ")
        )));
    }
    Ok(chosen)
}

pub fn run(spec: &ScenarioSpec) -> Result<RunReport> {
    let groups = select(spec.filter.as_deref())?;
    let ctx = Context { seed: spec.seed };
    let mut report = RunReport::new("verify", spec.params());
    for g in groups {
        for c in g.run(&ctx) {
            report.push(c);
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn filter_selects_by_substring() {
        assert_eq!(select(Some("young")).unwrap().len(), 1);
        assert_eq!(select(None).unwrap().len(), GROUPS.len());
        assert!(matches!(select(Some("nothing-here")), Err(CliError::Config(_))));
    }

    #[test]
    fn group_names_are_unique_and_criteria_ordered() {
        for (k, g) in GROUPS.iter().enumerate() {
            assert_eq!(g.criterion as usize, k + 1);
            assert!(GROUPS.iter().filter(|h| h.name == g.name).count() == 1);
        }
    }

    #[test]
    fn group_generators_differ() {
        let ctx = Context { seed: 3 };
        let a: f64 = ctx.rng("young").random();
        let b: f64 = ctx.rng("vkde").random();
        let c: f64 = ctx.rng("young").random();
        assert_ne!(a, b);
        assert_eq!(a, c);
    }
}
