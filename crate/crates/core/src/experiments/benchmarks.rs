use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::RunConfig;
use crate::error::{Error, Result};
use crate::mesh_fe::{FeSpace, Rect};
use crate::schemes::{init_state_with, PhaseIc, PhaseState, Projection};

/// Built-in initial conditions.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum BenchmarkId {
    Lens,
    TwoBubbles,
    Spinodal2,
    Spinodal4,
    BubblesFlow,
    ConvergenceIc,
}

impl BenchmarkId {
    /// Catalog order, as printed by `list`.
    pub const ALL: [BenchmarkId; 6] = [
        BenchmarkId::Lens,
        BenchmarkId::TwoBubbles,
        BenchmarkId::Spinodal2,
        BenchmarkId::Spinodal4,
        BenchmarkId::BubblesFlow,
        BenchmarkId::ConvergenceIc,
    ];

    pub fn name(self) -> &'static str {
        match self {
            BenchmarkId::Lens => "lens",
            BenchmarkId::TwoBubbles => "two_bubbles",
            BenchmarkId::Spinodal2 => "spinodal2",
            BenchmarkId::Spinodal4 => "spinodal4",
            BenchmarkId::BubblesFlow => "bubbles_flow",
            BenchmarkId::ConvergenceIc => "convergence_ic",
        }
    }

    pub fn description(self) -> &'static str {
        match self {
            BenchmarkId::Lens => "stratified liquid lens between two layers",
            BenchmarkId::TwoBubbles => "two circular droplets suspended in a third phase",
            BenchmarkId::Spinodal2 => "ternary spinodal decomposition from a perturbed mixture",
            BenchmarkId::Spinodal4 => "four-phase spinodal decomposition",
            BenchmarkId::BubblesFlow => "two droplets in a rotating Navier-Stokes flow",
            BenchmarkId::ConvergenceIc => "smooth data for time-convergence studies",
        }
    }

    pub fn num_phases(self) -> usize {
        match self {
            BenchmarkId::Spinodal4 => 4,
            _ => 3,
        }
    }

    pub fn domain(self) -> Rect {
        match self {
            BenchmarkId::Lens => Rect::new(-0.25, 0.25, -0.1, 0.15),
            BenchmarkId::ConvergenceIc => Rect::unit(),
            _ => Rect::new(-0.125, 0.125, -0.125, 0.125),
        }
    }

    /// Case-insensitive lookup; unknown names carry the closest catalog entry.
    pub fn parse(name: &str) -> Result<Self> {
        let key = name.trim().to_ascii_lowercase().replace('-', "_");
        if let Some(id) = Self::ALL.iter().find(|id| id.name() == key) {
            return Ok(*id);
        }
        let suggestion = Self::ALL
            .iter()
            .map(|id| (strsim::levenshtein(&key, id.name()), id.name()))
            .min()
            .filter(|(d, _)| *d <= 4)
            .map(|(_, n)| n.to_string());
        Err(Error::UnknownBenchmark {
            name: name.to_string(),
            suggestion,
        })
    }
}

impl fmt::Display for BenchmarkId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

fn tanh_profile(eps: f64) -> impl Fn(f64) -> f64 {
    move |s| (2.0 / eps * s).tanh()
}

/// Analytic or seeded-random initial phases of a benchmark.
pub fn initial_conditions(cfg: &RunConfig, space: &FeSpace) -> Vec<PhaseIc> {
    let eps = cfg.epsilon;
    match cfg.benchmark {
        BenchmarkId::Lens => {
            let th = tanh_profile(eps);
            let th2 = tanh_profile(eps);
            vec![
                PhaseIc::analytic(move |x, y| 0.5 * (1.0 + th(((x * x + y * y).sqrt() - 0.1).min(y)))),
                PhaseIc::analytic(move |x, y| 0.5 * (1.0 - th2((0.1 - (x * x + y * y).sqrt()).max(y)))),
                PhaseIc::Remainder,
            ]
        }
        BenchmarkId::TwoBubbles | BenchmarkId::BubblesFlow => {
            let droplet = |cx: f64| {
                let th = tanh_profile(eps);
                PhaseIc::analytic(move |x, y| 0.5 - 0.5 * th(((x - cx).powi(2) + y * y).sqrt() - 0.035))
            };
            vec![droplet(0.035), droplet(-0.035), PhaseIc::Remainder]
        }
        BenchmarkId::Spinodal2 | BenchmarkId::Spinodal4 => {
            let n = cfg.benchmark.num_phases();
            let base = if n == 3 { 0.33 } else { 0.25 };
            // One stream, phase by phase, nodes in lexicographic order.
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
            let mut ics: Vec<PhaseIc> = (0..n - 1)
                .map(|_| {
                    PhaseIc::Nodal(
                        (0..space.num_nodes())
                            .map(|_| base + 0.01 * rng.gen::<f64>())
                            .collect(),
                    )
                })
                .collect();
            ics.push(PhaseIc::Remainder);
            ics
        }
        BenchmarkId::ConvergenceIc => {
            use std::f64::consts::PI;
            vec![
                PhaseIc::analytic(|x, y| 0.3 * (PI * x).sin() * (PI * (y - 0.5)).cos()),
                PhaseIc::analytic(|x, y| 0.15 + 0.15 * (2.0 * PI * x).sin() * (PI * (2.0 * y - 0.5)).cos()),
                PhaseIc::Remainder,
            ]
        }
    }
}

/// Nodal interpolant of the benchmark's initial data.
pub fn build_initial_state(cfg: &RunConfig, space: &FeSpace) -> Result<PhaseState> {
    init_state_with(space, &initial_conditions(cfg, space), Projection::Nodal)
}
