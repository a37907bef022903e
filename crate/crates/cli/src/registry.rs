//! Experiment registry: names, descriptions, defaults and runners.

use std::fs;
use std::io::BufWriter;
use std::path::Path;

use calabi_lab::backend::{make_geometry, BackendKind, Potential};
use calabi_lab::experiments::families::{crossing_pair, low_mode_potential, smooth_family};
use calabi_lab::experiments::suites::{zonal_start, SuiteOutcome, SuiteParams, SUITES};
use calabi_lab::experiments::{
    max_smoothing_family, q_gt_1_domination_sweep, spike_density_family, SpikeConfig, VerdictTable,
};
use calabi_lab::finsler::{calabi_distance_bracket, PairStat};
use calabi_lab::flows::{calabi_flow_run, flow_length_criterion, kr_flow_run, FlowControls, FlowTrajectory};
use calabi_lab::numeric::compensated_sum;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::config::{Exponents, RunConfig};
use crate::error::{usage, CliResult};

/// What a runner hands back; extra artifacts are already in the run directory.
#[derive(Debug, Default)]
pub struct Outcome {
    pub table: VerdictTable,
    pub stats: Vec<PairStat>,
}

impl From<SuiteOutcome> for Outcome {
    fn from(o: SuiteOutcome) -> Self {
        Outcome {
            table: o.table,
            stats: o.stats,
        }
    }
}

type ConfigRunner = fn(&RunConfig, Exponents, &Path) -> CliResult<Outcome>;
type SuiteRunner = fn(&SuiteParams) -> calabi_lab::Result<SuiteOutcome>;

#[derive(Clone, Copy)]
pub enum Runner {
    /// driven by the backend, exponent and schedule sections
    Config(ConfigRunner),
    /// a fixed check; only the seed, `backend.resolution` and `schedule.trials` apply
    Suite(SuiteRunner),
    /// every suite in order
    AllSuites,
}

pub struct Experiment {
    pub name: &'static str,
    pub summary: &'static str,
    pub mechanism: &'static str,
    pub parameters: &'static str,
    pub pass_criteria: &'static str,
    pub default_kind: BackendKind,
    pub default_exponents: Exponents,
    pub runner: Runner,
}

const ONES: Exponents = Exponents::new(1.0, 1.0, 1.0);
const SUITE_PARAMS: &str = "seed; backend.resolution overrides the main grid; schedule.trials overrides the number of random draws";

fn suite(name: &str) -> SuiteRunner {
    SUITES.iter().find(|(n, _)| *n == name).expect("suite registered").1
}

pub fn registry() -> Vec<Experiment> {
    vec![
        Experiment {
            name: "max-smoothing",
            summary: "smoothed maximum of two crossing potentials",
            mechanism: "The maximum of two potentials whose difference changes sign transversally has a Monge-Ampère measure \
                        that charges the crossing curve. Its quadratic smoothings converge in the L1-Mabuchi sense, yet their \
                        densities keep a fixed amount of mass in a shrinking collar around the crossing, so the q = 1 Calabi \
                        statistic between early and late terms stays bounded below.",
            parameters: "backend.kind (flat-torus), backend.resolution (256), schedule.eps (0.025, halving), \
                         schedule.eps_count (11), output.snapshot_stride",
            pass_criteria: "consecutive Mabuchi statistics decrease and end below 1e-4; the first-to-last Calabi statistic \
                            exceeds half the level-set charge; collar mass stays above half the charge",
            default_kind: BackendKind::FlatTorus,
            default_exponents: ONES,
            runner: Runner::Config(run_max_smoothing),
        },
        Experiment {
            name: "spike",
            summary: "densities concentrating on shells of a logarithmic spike",
            mechanism: "A truncated logarithmic potential splits the torus into shells where its size lies between k and k+1. \
                        Densities putting mass proportional to k^-2 on the k-th shell converge in L1 with a k^-2 tail, while \
                        the moment of the model potential grows like a harmonic number, so the Mabuchi statistic does not \
                        settle at any fixed resolution.",
            parameters: "backend.resolution (256, torus only), schedule.k_max (64), exponents.p_prime (1)",
            pass_criteria: "witness within 5% of (6V/π²)·H_K; consecutive L1 distances within 10% of the k^-2 tail",
            default_kind: BackendKind::FlatTorus,
            default_exponents: ONES,
            runner: Runner::Config(run_spike),
        },
        Experiment {
            name: "q-domination",
            summary: "Mabuchi domination by the q > 1 Calabi statistic",
            mechanism: "For q > 1 an L^q bound on the density difference controls the oscillation of the potentials, so a \
                        vanishing Calabi statistic forces the Mabuchi statistic to vanish. The sweep checks every pair of \
                        every random smooth family against fixed thresholds.",
            parameters: "exponents p, q > 1, p_prime (2, 2, 2); schedule.trials (50 families); backend.kind and \
                         backend.resolution (alternating torus 32 and ℙ¹ 64 when unset)",
            pass_criteria: "no pair with Calabi statistic below 1e-6 and Mabuchi statistic at least 1e-4; the vanishing \
                            threshold is reached; sup oscillation vanishes alongside",
            default_kind: BackendKind::FlatTorus,
            default_exponents: Exponents::new(2.0, 2.0, 2.0),
            runner: Runner::Config(run_q_domination),
        },
        Experiment {
            name: "entropy-equivalence",
            summary: "co-vanishing of four convergence statistics under bounded entropy",
            mechanism: "Along sequences whose entropy stays controlled, L1 convergence of potentials, weak convergence of \
                        measures, the Mabuchi statistic and the Calabi statistic vanish together. The smoothed maximum \
                        has drifting entropy, and there the statistics decouple.",
            parameters: SUITE_PARAMS,
            pass_criteria: "on convergent families all statistics fall below 1e-4 once any falls below 1e-6; the divergent \
                            family shows one statistic dropping a hundredfold while another persists",
            default_kind: BackendKind::FlatTorus,
            default_exponents: ONES,
            runner: Runner::Suite(suite("entropy-equivalence")),
        },
        Experiment {
            name: "kr-criterion",
            summary: "length criterion along one Kähler-Ricci flow",
            mechanism: "The normalized Kähler-Ricci flow on ℙ¹ from a perturbed round metric converges exponentially. The \
                        Calabi speed g(t) of the flow line is integrable, so the flow has finite length and its late states \
                        form a Cauchy family.",
            parameters: "backend.resolution (128, round-p1 only), exponents p (\"inf\" allowed), q (2, 1), schedule.dt (0.01), \
                         schedule.t_end (12), output.snapshot_stride (10)",
            pass_criteria: "fitted rate positive; integral of g with fitted tail finite; late Calabi Cauchy statistic below 1e-6",
            default_kind: BackendKind::RoundP1,
            default_exponents: Exponents::new(2.0, 1.0, 1.0),
            runner: Runner::Config(run_kr_criterion),
        },
        Experiment {
            name: "calabi-flow",
            summary: "Calabi flow from a perturbed constant-curvature metric",
            mechanism: "The Calabi flow decreases the Calabi energy and converges to the constant-curvature metric from nearby \
                        starts. Terminal densities approach the limit in L1 and the Calabi distance bracket to the limit \
                        closes.",
            parameters: "backend.kind (round-p1), backend.resolution (torus 64, ℙ¹ 128), exponents p, q for the bracket (3, 1), \
                         schedule.dt and schedule.t_end (torus 1e-3 and 0.1, ℙ¹ 5e-3 and 4), output.snapshot_stride (10)",
            pass_criteria: "terminal ∫|ρ - 1| ω below 1e-5; bracket width shrinks a thousandfold without increasing",
            default_kind: BackendKind::RoundP1,
            default_exponents: Exponents::new(3.0, 1.0, 1.0),
            runner: Runner::Config(run_calabi_flow),
        },
        suite_entry(
            "isometry",
            "Finsler length against flat length of the embedded curve",
            "Sending a potential to a power of its density embeds the Calabi structure isometrically into a flat L^p space. \
             Discrete path lengths on both sides agree up to a quadrature error that shrinks at second order.",
            "relative gap shrinks by a factor above 3 per mesh doubling; final gap below 1e-3",
        ),
        suite_entry(
            "sphere-bracket",
            "chord and segment bounds for L^p sphere distances",
            "Distances on the positive part of an L^{p/q} sphere lie between the chord and the length of the projected \
             segment. Each step of the comparison chain is checked pointwise.",
            "no violated link of the chain on 1000 random pairs per exponent pair; projected norm never below r/2",
        ),
        suite_entry(
            "great-circle",
            "closed form for p = 2, q = 1 and curvature comparison",
            "For p = 2 and q = 1 the sphere is a round L2 sphere, so the distance is an arc length of the angle between \
             square roots of densities. Geodesic triangles satisfy the comparison inequality for curvature 1/4.",
            "closed form inside the bracket and within 1e-8 of the curvature-corrected chord; no comparison violation above 1e-8",
        ),
        suite_entry(
            "vitali",
            "equivalence of two L^p convergence statistics",
            "For nonnegative functions, L^p convergence is equivalent to convergence in measure plus equi-integrability. \
             Mass escaping onto shrinking sets breaks both.",
            "one statistic below 1e-6 forces the other below 1e-3 on 50 families; the escaping family violates both",
        ),
        suite_entry(
            "cauchy",
            "Cauchy statistics for smooth families and the smoothed maximum",
            "Smooth families are Cauchy for both metrics. The smoothed maximum is Cauchy for the Mabuchi metric but keeps \
             a positive Calabi gap that is the same at every resolution.",
            "smooth statistics below 1e-8; max-smoothing verdicts at N, 2N, 4N; gap stable within 20%",
        ),
        suite_entry(
            "pinsker",
            "entropy controls the L1 distance of densities",
            "Relative entropy bounds the squared total variation distance. The constant is calibrated once on the two-cell \
             closed form and then frozen.",
            "calibration matches the frozen constant; no violation over 10^4 random pairs",
        ),
        suite_entry(
            "kr-flow",
            "Kähler-Ricci flow convergence with refinement study",
            "The same flow as kr-criterion, repeated under dt halving and resolution halving for four exponent pairs \
             including p = ∞.",
            "rate stable within 10% under dt halving; length stable within 1% under refinement; late Cauchy statistic below 1e-6",
        ),
        suite_entry(
            "backend-oracles",
            "discretization checks for both backends",
            "The Monge-Ampère inverse reproduces the potential, the torus Laplacian converges at second order, the ℙ¹ \
             Laplacian reproduces the low spectrum exactly, and total scalar curvature is topological.",
            "round trip below 1e-9; observed order 2 ± 0.1; ℙ¹ eigenvalues exact to 1e-9; mean curvature within 1e-6",
        ),
        Experiment {
            name: "acceptance",
            summary: "every suite in order",
            mechanism: "Runs the twelve fixed suites and merges their verdicts.",
            parameters: SUITE_PARAMS,
            pass_criteria: "every suite passes",
            default_kind: BackendKind::FlatTorus,
            default_exponents: ONES,
            runner: Runner::AllSuites,
        },
    ]
}

fn suite_entry(name: &'static str, summary: &'static str, mechanism: &'static str, pass_criteria: &'static str) -> Experiment {
    Experiment {
        name,
        summary,
        mechanism,
        parameters: SUITE_PARAMS,
        pass_criteria,
        default_kind: BackendKind::FlatTorus,
        default_exponents: ONES,
        runner: Runner::Suite(suite(name)),
    }
}

pub fn names() -> Vec<&'static str> {
    registry().iter().map(|e| e.name).collect()
}

pub fn find(name: &str) -> CliResult<Experiment> {
    registry()
        .into_iter()
        .find(|e| e.name == name)
        .ok_or_else(|| usage(format!("unknown experiment `{name}`; valid names: {}", names().join(", "))))
}

impl Experiment {
    pub fn describe(&self) -> String {
        format!(
            "{name}: {summary}\n\n  mechanism:  {mech}\n  parameters: {params}\n  passes if:  {pass}\n",
            name = self.name,
            summary = self.summary,
            mech = self.mechanism,
            params = self.parameters,
            pass = self.pass_criteria,
        )
    }

    pub fn run(&self, cfg: &RunConfig, dir: &Path) -> CliResult<Outcome> {
        let params = SuiteParams {
            seed: cfg.seed,
            resolution: cfg.backend.resolution,
            trials: cfg.schedule.trials,
        };
        match self.runner {
            Runner::Config(f) => f(cfg, cfg.exponents(self.default_exponents), dir),
            Runner::Suite(f) => Ok(f(&params)?.into()),
            Runner::AllSuites => {
                let mut all = Outcome {
                    table: VerdictTable::new("acceptance"),
                    stats: Vec::new(),
                };
                for (name, f) in SUITES {
                    log::info!("suite {name}");
                    let o = f(&params)?;
                    all.stats.extend(o.stats.into_iter().map(|s| PairStat {
                        stat_name: format!("{name}.{}", s.stat_name),
                        ..s
                    }));
                    all.table.merge(name, o.table);
                }
                Ok(all)
            }
        }
    }
}

fn kind(cfg: &RunConfig, default: BackendKind) -> BackendKind {
    cfg.backend.kind.unwrap_or(default)
}

fn require_kind(cfg: &RunConfig, want: BackendKind, experiment: &str) -> CliResult<()> {
    match cfg.backend.kind {
        Some(k) if k != want => Err(usage(format!("{experiment} runs on the {} backend only", want.name()))),
        _ => Ok(()),
    }
}

fn seeded(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    r.set_stream(stream);
    r
}

fn run_max_smoothing(cfg: &RunConfig, _: Exponents, dir: &Path) -> CliResult<Outcome> {
    let g = make_geometry(kind(cfg, BackendKind::FlatTorus), cfg.backend.resolution.unwrap_or(256))?;
    let start = cfg.schedule.eps.unwrap_or(0.025);
    let schedule: Vec<f64> = (0..cfg.schedule.eps_count.unwrap_or(11))
        .map(|k| start * 0.5f64.powi(k as i32))
        .collect();
    let (v0, v1) = crossing_pair(&g, 0.02)?;
    let r = max_smoothing_family(&v0, &v1, &schedule)?;
    let mut out = Outcome {
        table: r.verdicts(),
        stats: Vec::new(),
    };
    if let Some(e) = r.experiment {
        e.write(dir, cfg.snapshot_stride())?;
        out.stats = e.stats;
    }
    Ok(out)
}

fn run_spike(cfg: &RunConfig, e: Exponents, dir: &Path) -> CliResult<Outcome> {
    require_kind(cfg, BackendKind::FlatTorus, "spike")?;
    let r = spike_density_family(SpikeConfig {
        resolution: cfg.backend.resolution.unwrap_or(256),
        k_max: cfg.schedule.k_max.unwrap_or(64),
        p_prime: e.p_prime,
        ..Default::default()
    })?;
    let mut out = Outcome {
        table: r.verdicts(),
        stats: Vec::new(),
    };
    if let Some(x) = r.experiment {
        x.write(dir, cfg.snapshot_stride())?;
        out.stats = x.stats;
    }
    Ok(out)
}

fn run_q_domination(cfg: &RunConfig, e: Exponents, _: &Path) -> CliResult<Outcome> {
    if !(e.q > 1.0) {
        return Err(usage(format!("q-domination needs q > 1, got q = {}", e.q)));
    }
    let geoms = match cfg.backend.kind {
        Some(k) => {
            let n = cfg
                .backend
                .resolution
                .unwrap_or(if k == BackendKind::FlatTorus { 32 } else { 64 });
            vec![make_geometry(k, n)?]
        }
        None => vec![
            make_geometry(BackendKind::FlatTorus, cfg.backend.resolution.unwrap_or(32))?,
            make_geometry(BackendKind::RoundP1, 2 * cfg.backend.resolution.unwrap_or(32))?,
        ],
    };
    let idx: Vec<usize> = (0..=10).map(|e| 1usize << e).collect();
    let fams = calabi_lab::par::map_indexed(cfg.schedule.trials.unwrap_or(50), |f| -> calabi_lab::Result<Vec<Potential>> {
        let mut rng = seeded(cfg.seed, 6000 + f as u64);
        let g = &geoms[f % geoms.len()];
        let u = low_mode_potential(g, &mut rng, 0.4, 1);
        let phi = low_mode_potential(g, &mut rng, 0.4, 1);
        smooth_family(&u, &phi, &idx, 2.0)
    })
    .into_iter()
    .collect::<calabi_lab::Result<Vec<_>>>()?;
    let r = q_gt_1_domination_sweep(&fams, e.p, e.q, e.p_prime)?;
    Ok(Outcome {
        table: r.verdicts(),
        stats: r.pair_stats(),
    })
}

fn save_trajectory(traj: &FlowTrajectory, cfg: &RunConfig, dir: &Path) -> CliResult<()> {
    traj.save(&dir.join("trajectory"), cfg.output.snapshot_stride.unwrap_or(10).max(1), Some(cfg.seed))?;
    Ok(())
}

fn run_kr_criterion(cfg: &RunConfig, e: Exponents, dir: &Path) -> CliResult<Outcome> {
    require_kind(cfg, BackendKind::RoundP1, "kr-criterion")?;
    let g = make_geometry(BackendKind::RoundP1, cfg.backend.resolution.unwrap_or(128))?;
    let traj = kr_flow_run(
        &zonal_start(&g, 0.05)?,
        cfg.schedule.dt.unwrap_or(0.01),
        cfg.schedule.t_end.unwrap_or(12.0),
        FlowControls::default(),
    )?;
    save_trajectory(&traj, cfg, dir)?;
    let r = flow_length_criterion(&traj, e.p, e.q)?;
    r.write_csv(BufWriter::new(fs::File::create(dir.join("criterion.csv"))?))?;
    let mut out = Outcome {
        table: VerdictTable::new("kr-criterion"),
        stats: Vec::new(),
    };
    for (i, (g, s)) in r.g.iter().zip(&r.running_integral).enumerate() {
        out.stats.push(PairStat { j: i, k: 0, stat_name: "g".into(), value: *g });
        out.stats.push(PairStat { j: i, k: 0, stat_name: "running_integral".into(), value: *s });
    }
    let rate = r.rate().unwrap_or(0.0);
    out.table.check("rate_positive", rate > 0.0, Some(rate), "fitted exponential rate of g(t)");
    out.table.check(
        "length_finite",
        r.finite,
        Some(r.integral_with_tail),
        "integral of g with the fitted exponential tail",
    );
    out.table.check(
        "late_cauchy_below_1e-6",
        r.late_cauchy < 1e-6,
        Some(r.late_cauchy),
        "Calabi Cauchy statistic between late states",
    );
    out.table.record("integral", r.integral);
    out.table.record("speed_mismatch", r.speed_mismatch);
    Ok(out)
}

fn run_calabi_flow(cfg: &RunConfig, e: Exponents, dir: &Path) -> CliResult<Outcome> {
    let k = kind(cfg, BackendKind::RoundP1);
    let (u0, dt, t_end) = match k {
        BackendKind::FlatTorus => {
            let g = make_geometry(k, cfg.backend.resolution.unwrap_or(64))?;
            (low_mode_potential(&g, &mut seeded(cfg.seed, 9000), 0.3, 1), 1e-3, 0.1)
        }
        BackendKind::RoundP1 => {
            let g = make_geometry(k, cfg.backend.resolution.unwrap_or(128))?;
            (zonal_start(&g, 0.05)?, 5e-3, 4.0)
        }
    };
    let traj = calabi_flow_run(
        &u0,
        cfg.schedule.dt.unwrap_or(dt),
        cfg.schedule.t_end.unwrap_or(t_end),
        FlowControls::default(),
    )?;
    save_trajectory(&traj, cfg, dir)?;
    let g = traj.geometry();
    let mut out = Outcome {
        table: VerdictTable::new("calabi-flow"),
        stats: Vec::new(),
    };
    let l1 = compensated_sum(
        traj.last()
            .density_values()
            .iter()
            .zip(g.weights())
            .map(|(r, w)| w * (r - 1.0).abs()),
    );
    out.table.check(
        "terminal_density_l1_below_1e-5",
        l1 < 1e-5,
        Some(l1),
        "∫|ρ_T - 1| ω against the constant-curvature limit",
    );
    let zero = Potential::zero(g.clone());
    let last = traj.states.len() - 1;
    let mut widths = Vec::new();
    for i in (0..=8).map(|j| j * last / 8) {
        let w = calabi_distance_bracket(&traj.states[i], &zero, e.p, e.q, 8)?.width();
        out.stats.push(PairStat { j: i, k: 0, stat_name: "bracket_width".into(), value: w });
        widths.push(w);
    }
    let shrink = widths[widths.len() - 1] / widths[0].max(f64::MIN_POSITIVE);
    out.table.check(
        "bracket_width_vanishes",
        shrink < 1e-3 && widths.windows(2).all(|w| w[1] <= w[0] * (1.0 + 1e-9) + 1e-12 * widths[0]),
        Some(shrink),
        "terminal over initial bracket width, nonincreasing in between",
    );
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_suite_is_registered() {
        let names = names();
        for (s, _) in SUITES {
            assert!(names.contains(&s) || s == "spike" || s == "q-domination" || s == "calabi-flow", "{s}");
        }
        assert!(find("nope").is_err());
    }

    #[test]
    fn descriptions_are_free_of_numbering() {
        for e in registry() {
            let d = e.describe();
            assert!(!d.to_lowercase().contains("theorem"), "{}", e.name);
            assert!(d.contains(e.name));
        }
    }
}
