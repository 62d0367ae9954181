//! Experiment runners. Each experiment owns a parameter schema, preset
//! defaults and a runner that turns resolved parameters into [`Artifacts`].

use std::f64::consts::PI;

use anyhow::{anyhow, bail, Context, Result};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use fmqrm_core::analytics::{self, resonance_position};
use fmqrm_core::circuit::{self, CircuitParams, FluxDrive, PLANCK};
use fmqrm_core::dynamics::{
    self, default_two_level_channels, fidelity_vs_x, frame_equivalence, rotating_frame_resonance, rotating_frame_run,
    three_level_leakage, Channel, ExactEvolution, Generator, LeakageSetup, PropagationConfig, SnapshotConvention,
    TrajectoryRecord,
};
use fmqrm_core::frames::{bessel_j_orders, from_effective, EffectiveParams, LabFrameParams, RotatingFrame, BESSEL_X_LIMIT};
use fmqrm_core::hamiltonians::{anisotropic_rabi, TimeDependentOperator, DEFAULT_BESSEL_ORDER};
use fmqrm_core::hilbert::{HilbertSpace, DEFAULT_FOCK_CUTOFF};
use fmqrm_core::linalg::{c64, eig_hermitian};
use fmqrm_core::open_system::{lindblad_rhs, run_flux, DensityMatrix, DissipationParams, FluxRun, FluxSetup, MasterMethod};
use fmqrm_core::presets::{self, UnitReading};
use fmqrm_core::spectral::{self, locate_crossing, scan_spectrum, E0, G3};
use fmqrm_core::{ComplexMatrix, StateVector, C64};

use crate::config::{Kind, ParamSet, ParamSpec};
use crate::output::{col, Artifacts, Cell, Table};

/// Reference values quoted for the operating points, used by the headline
/// checks in `summary.txt`.
pub mod reference {
    pub const FIG3_OMEGA_C: f64 = 0.3335153;
    pub const FIG3_OMEGA_C_TOL: f64 = 5e-6;
    pub const FIG3_SPLITTING: f64 = 2.35e-6;
    pub const FIG3_SPLITTING_REL_TOL: f64 = 0.02;
    pub const ANALYTIC_POSITION_REL_TOL: f64 = 1e-5;
    pub const ANALYTIC_SPLITTING_REL_TOL: f64 = 0.02;
    pub const MIN_OVERLAP: f64 = 0.99;
    pub const SPLITTING_PERCENT_LIMIT: f64 = 3.0;
    pub const SPLITTING_LAMBDA_LIMIT: f64 = 0.05;
    pub const SLOPE: f64 = 3.0;
    pub const SLOPE_TOL: f64 = 0.05;
    pub const EFFECTIVE_MIN_FIDELITY: f64 = 0.995;
    pub const ROTATING_MIN_FIDELITY: f64 = 0.98;
    pub const LONG_RUN_FIDELITY: f64 = 0.9918;
    pub const LONG_RUN_FIDELITY_TOL: f64 = 0.005;
    pub const FRAME_EQUIVALENCE_TOL: f64 = 1e-6;
    pub const FIDELITY_PEAK_X: (f64, f64) = (0.45, 0.55);
    pub const FIDELITY_AT_HALF: f64 = 0.99;
    pub const UNMODULATED_FLUX_RATIO: f64 = 1e-3;
    pub const FAR_DETUNED_FLUX_RATIO: f64 = 1e-3;
    pub const TRACE_TOL: f64 = 1e-8;
    pub const SEC6_FLUX_REL_TOL: f64 = 0.5;
    pub const LEAKAGE_MAX_F: f64 = 0.01;
    pub const LEAKAGE_MIN_G3: f64 = 0.9;
    pub const UNMODULATED_G3_FRACTION: f64 = 0.5;
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum Experiment {
    Spectrum,
    Crossing,
    Dynamics,
    FidelitySweep,
    SplittingCompare,
    Flux,
    CircuitMap,
    ThreeLevel,
    Selftest,
}

/// Resolved inputs of one run.
#[derive(Clone, Debug)]
pub struct RunContext {
    pub experiment: Experiment,
    pub preset: String,
    pub params: ParamSet,
    pub long_run: bool,
    pub seed: u64,
}

impl Experiment {
    pub const ALL: [Experiment; 9] = [
        Experiment::Spectrum,
        Experiment::Crossing,
        Experiment::Dynamics,
        Experiment::FidelitySweep,
        Experiment::SplittingCompare,
        Experiment::Flux,
        Experiment::CircuitMap,
        Experiment::ThreeLevel,
        Experiment::Selftest,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Experiment::Spectrum => "spectrum",
            Experiment::Crossing => "crossing",
            Experiment::Dynamics => "dynamics",
            Experiment::FidelitySweep => "fidelity-sweep",
            Experiment::SplittingCompare => "splitting-compare",
            Experiment::Flux => "flux",
            Experiment::CircuitMap => "circuit-map",
            Experiment::ThreeLevel => "three-level",
            Experiment::Selftest => "selftest",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|e| e.name() == s)
    }

    pub fn description(self) -> &'static str {
        match self {
            Experiment::Spectrum => "eigenvalues of the anisotropic Rabi model along a cavity-frequency sweep",
            Experiment::Crossing => "three-photon avoided crossing: location, splitting, overlaps, closed forms",
            Experiment::Dynamics => "|e,0> -> |g,3> oscillation under the effective and sideband models, plus frame check",
            Experiment::FidelitySweep => "P(g,3) at a common snapshot time versus modulation depth",
            Experiment::SplittingCompare => "numeric versus second-order analytic splitting over coupling strength",
            Experiment::Flux => "output photon flux from the dressed-state master equation",
            Experiment::CircuitMap => "Josephson circuit constants to model parameters, optionally fitted",
            Experiment::ThreeLevel => "leakage into the third atomic level with and without modulation",
            Experiment::Selftest => "randomised numerical invariants (seeded)",
        }
    }

    /// Presets the experiment accepts; the first is its default.
    pub fn presets(self) -> &'static [&'static str] {
        match self {
            Experiment::Spectrum => &["fig3"],
            Experiment::Crossing => &["fig3", "fig4"],
            Experiment::Dynamics => &["fig5"],
            Experiment::FidelitySweep => &["fig6"],
            Experiment::SplittingCompare => &["fig7"],
            Experiment::Flux => &["fig9", "sec6"],
            Experiment::CircuitMap => &["circuit", "sec6"],
            Experiment::ThreeLevel => &["three-level"],
            Experiment::Selftest => &["selftest"],
        }
    }

    /// Experiment a preset runs when no subcommand is given.
    pub fn for_preset(preset: &str) -> Option<Self> {
        Some(match preset {
            "fig3" | "fig4" => Experiment::Crossing,
            "fig5" => Experiment::Dynamics,
            "fig6" => Experiment::FidelitySweep,
            "fig7" => Experiment::SplittingCompare,
            "fig9" | "sec6" => Experiment::Flux,
            "circuit" => Experiment::CircuitMap,
            "three-level" => Experiment::ThreeLevel,
            "selftest" => Experiment::Selftest,
            _ => return None,
        })
    }

    pub fn schema(self, preset: &str) -> Vec<ParamSpec> {
        let p = |key, kind, unit, help| ParamSpec { key, kind, unit, help };
        let fock = p("fock_cutoff", Kind::Int, "", "highest photon number kept");
        match self {
            Experiment::Spectrum => vec![
                p("lambda", Kind::Float, "omega0", "coupling"),
                p("x", Kind::Float, "", "modulation depth A/omega_f"),
                p("omega0", Kind::Float, "omega0", "effective atomic frequency"),
                p("omega_c_centre", Kind::Float, "omega0", "sweep centre"),
                p("half_width", Kind::Float, "omega0", "sweep half width"),
                p("points", Kind::Int, "", "sweep points"),
                p("levels", Kind::Floats, "", "eigenvalue indices to record (ascending order)"),
                fock,
            ],
            Experiment::Crossing => vec![
                p("lambdas", Kind::Floats, "omega0", "couplings to locate the crossing at"),
                p("x", Kind::Float, "", "modulation depth"),
                p("omega0", Kind::Float, "omega0", "effective atomic frequency"),
                p("bracket_half_width", Kind::Float, "omega0", "search bracket around the closed-form position"),
                p("scan_points", Kind::Int, "", "spectrum points around each crossing (0 disables)"),
                p("scan_half_width", Kind::Float, "omega0", "spectrum half width"),
                fock,
            ],
            Experiment::Dynamics => vec![
                p("effective_lambda", Kind::Float, "omega0", "coupling of the effective-model run"),
                p("lambda", Kind::Float, "omega0", "coupling of the sideband-model run"),
                p("x", Kind::Float, "", "modulation depth"),
                p("omega0_lab", Kind::Float, "omega0", "lab atomic frequency"),
                p("order", Kind::Int, "", "highest sideband order kept"),
                p("omega_c", Kind::Text, "omega0", "effective cavity frequency, or auto to re-locate each model's resonance"),
                p("t_final", Kind::Text, "1/omega0", "run length, or auto for one Rabi period"),
                p("samples", Kind::Int, "", "output samples per run"),
                p("frame_check", Kind::Bool, "", "compare lab and sideband models over a short window"),
                p("frame_lambda", Kind::Float, "omega0", "coupling of the frame check"),
                p("frame_t_final", Kind::Float, "1/omega0", "frame-check window"),
                p("frame_steps", Kind::Float, "", "RK4 steps per fastest period in the frame check"),
                fock,
            ],
            Experiment::FidelitySweep => vec![
                p("lambda", Kind::Float, "omega0", "coupling"),
                p("xs", Kind::Floats, "", "modulation depths"),
                p("snapshot", Kind::Text, "1/omega0", "first-maximum, half-rabi-period, or a time"),
                fock,
            ],
            Experiment::SplittingCompare => vec![
                p("lambdas", Kind::Floats, "omega0", "couplings"),
                p("x", Kind::Float, "", "modulation depth"),
                fock,
            ],
            Experiment::Flux if preset == "sec6" => vec![
                p("units", Kind::Text, "", "comma-separated unit readings: mixed, angular"),
                p("relaxation_times", Kind::Float, "1/kappa", "run length"),
                p("samples", Kind::Int, "", "output samples"),
                p("method", Kind::Text, "", "stroboscopic or direct"),
                fock,
            ],
            Experiment::Flux => vec![
                p("omega_fs", Kind::Floats, "omega0", "modulation frequencies (0 = unmodulated)"),
                p("lambda", Kind::Float, "omega0", "coupling"),
                p("x", Kind::Float, "", "modulation depth, A = x omega_f"),
                p("omega0_lab", Kind::Float, "omega0", "lab atomic frequency"),
                p("omega_c_lab", Kind::Float, "omega0", "lab cavity frequency"),
                p("rate", Kind::Float, "omega0", "cavity and atomic decay rates"),
                p("t_final", Kind::Float, "1/omega0", "run length"),
                p("samples", Kind::Int, "", "output samples"),
                p("method", Kind::Text, "", "stroboscopic or direct"),
                fock,
            ],
            Experiment::CircuitMap => vec![
                p("fit", Kind::Bool, "", "tune C_J, L_res, C_i, E_J and the flux drive to the sec6 targets"),
                p("units", Kind::Text, "", "unit reading of the targets: mixed or angular"),
                p("e_j_ghz", Kind::Float, "GHz", "SQUID Josephson energy E_J/h"),
                p("c_j_ff", Kind::Float, "fF", "SQUID junction capacitance"),
                p("e_jk_ghz", Kind::Float, "GHz", "array junction energy E_JK/h"),
                p("c_jk_ff", Kind::Float, "fF", "array junction capacitance"),
                p("n", Kind::Int, "", "array junctions"),
                p("l_res_nh", Kind::Float, "nH", "resonator inductance"),
                p("c_res_ff", Kind::Float, "fF", "resonator capacitance"),
                p("c_i_ff", Kind::Float, "fF", "coupling capacitance"),
                p("phase_rate", Kind::Float, "rad/ns", "rate of the external flux phase"),
            ],
            Experiment::ThreeLevel => vec![
                p("lambda", Kind::Float, "omega0", "coupling"),
                p("x", Kind::Float, "", "modulation depth"),
                p("omega0_lab", Kind::Float, "omega0", "lab atomic frequency of the modulated run"),
                p("delta_b_over_delta", Kind::Float, "", "anharmonicity over the effective detuning (modulated)"),
                p("delta_b_over_delta_prime", Kind::Float, "", "anharmonicity over the bare detuning (unmodulated)"),
                p("samples", Kind::Int, "", "output samples"),
                fock,
            ],
            Experiment::Selftest => vec![
                p("trials", Kind::Int, "", "random instances per check"),
                p("dim", Kind::Int, "", "matrix dimension"),
            ],
        }
    }

    /// Preset defaults as strings, parsed through the schema like any
    /// override.
    pub fn defaults(self, preset: &str, long_run: bool) -> Result<Vec<(&'static str, String)>> {
        if !self.presets().contains(&preset) {
            bail!(
                "preset `{preset}` does not apply to `{}` (expected one of {})",
                self.name(),
                self.presets().join(", ")
            );
        }
        let f = |v: f64| format!("{v:?}");
        let list = |v: &[f64]| v.iter().map(|x| format!("{x:?}")).collect::<Vec<_>>().join(", ");
        let fock = ("fock_cutoff", DEFAULT_FOCK_CUTOFF.to_string());
        let lambda = presets::LAMBDA;
        let x = presets::X;
        Ok(match self {
            Experiment::Spectrum => vec![
                ("lambda", f(lambda)),
                ("x", f(x)),
                ("omega0", f(1.0)),
                ("omega_c_centre", f(resonance_position(lambda, x))),
                ("half_width", f(5e-6)),
                ("points", "201".into()),
                ("levels", "0, 1, 2, 3, 4, 5, 6, 7".into()),
                fock,
            ],
            Experiment::Crossing => vec![
                ("lambdas", if preset == "fig4" { list(&presets::FIG4_LAMBDAS) } else { f(lambda) }),
                ("x", f(x)),
                ("omega0", f(1.0)),
                ("bracket_half_width", f(spectral::DEFAULT_BRACKET_HALF_WIDTH)),
                ("scan_points", if preset == "fig4" { "0".into() } else { "201".into() }),
                ("scan_half_width", f(5e-6)),
                fock,
            ],
            Experiment::Dynamics if long_run => vec![
                ("effective_lambda", f(lambda)),
                ("lambda", f(lambda)),
                ("x", f(x)),
                ("omega0_lab", f(presets::OMEGA0_LAB)),
                ("order", DEFAULT_BESSEL_ORDER.to_string()),
                ("omega_c", f(presets::FIG5_QUOTED_OMEGA_C)),
                ("t_final", f(1.5e6)),
                ("samples", "3000".into()),
                ("frame_check", "true".into()),
                ("frame_lambda", f(lambda)),
                ("frame_t_final", f(presets::FRAME_EQUIVALENCE_T)),
                ("frame_steps", f(dynamics::STEPS_PER_FASTEST_PERIOD)),
                fock,
            ],
            Experiment::Dynamics => vec![
                ("effective_lambda", f(lambda)),
                ("lambda", f(presets::FIG5_DESK_LAMBDA)),
                ("x", f(x)),
                ("omega0_lab", f(presets::OMEGA0_LAB)),
                ("order", DEFAULT_BESSEL_ORDER.to_string()),
                ("omega_c", "auto".into()),
                ("t_final", "auto".into()),
                ("samples", "3000".into()),
                ("frame_check", "true".into()),
                ("frame_lambda", f(lambda)),
                ("frame_t_final", f(presets::FRAME_EQUIVALENCE_T)),
                ("frame_steps", f(dynamics::STEPS_PER_FASTEST_PERIOD)),
                fock,
            ],
            Experiment::FidelitySweep => {
                vec![("lambda", f(lambda)), ("xs", list(&presets::fig6_xs())), ("snapshot", "first-maximum".into()), fock]
            }
            Experiment::SplittingCompare => vec![("lambdas", list(&presets::fig7_lambdas())), ("x", f(x)), fock],
            Experiment::Flux if preset == "sec6" => vec![
                ("units", "mixed, angular".into()),
                ("relaxation_times", f(presets::SEC6_RELAXATION_TIMES)),
                ("samples", "2000".into()),
                ("method", "stroboscopic".into()),
                fock,
            ],
            Experiment::Flux => {
                let base = presets::fig9(presets::FIG9_OMEGA_F[1])?;
                vec![
                    ("omega_fs", list(&presets::FIG9_OMEGA_F)),
                    ("lambda", f(base.lab.lambda)),
                    ("x", f(x)),
                    ("omega0_lab", f(base.lab.omega0)),
                    ("omega_c_lab", f(base.lab.omega_c)),
                    ("rate", f(presets::FIG9_RATE)),
                    ("t_final", f(presets::FIG9_T_FINAL)),
                    ("samples", base.samples.to_string()),
                    ("method", "stroboscopic".into()),
                    fock,
                ]
            }
            Experiment::CircuitMap => {
                let s = presets::circuit_seed();
                vec![
                    ("fit", "true".into()),
                    ("units", "mixed".into()),
                    ("e_j_ghz", f(s.e_j / (PLANCK * 1e9))),
                    ("c_j_ff", f(s.c_j * 1e15)),
                    ("e_jk_ghz", f(s.e_jk / (PLANCK * 1e9))),
                    ("c_jk_ff", f(s.c_jk * 1e15)),
                    ("n", s.n.to_string()),
                    ("l_res_nh", f(s.l_res * 1e9)),
                    ("c_res_ff", f(s.c_res * 1e15)),
                    ("c_i_ff", f(s.c_i * 1e15)),
                    ("phase_rate", f(s.flux_drive.phase_rate)),
                ]
            }
            Experiment::ThreeLevel => {
                let s = presets::three_level();
                vec![
                    ("lambda", f(s.lambda)),
                    ("x", f(s.x)),
                    ("omega0_lab", f(s.omega0_lab)),
                    ("delta_b_over_delta", f(s.delta_b_over_delta)),
                    ("delta_b_over_delta_prime", f(s.delta_b_over_delta_prime)),
                    ("samples", s.samples.to_string()),
                    ("fock_cutoff", s.fock_cutoff.to_string()),
                ]
            }
            Experiment::Selftest => vec![("trials", "20".into()), ("dim", "24".into())],
        })
    }

    pub fn run(self, ctx: &RunContext) -> Result<Artifacts> {
        let mut out = Artifacts::default();
        out.line(format!("experiment: {}", self.name()));
        out.line(format!("preset: {}", ctx.preset));
        match self {
            Experiment::Spectrum => spectrum(ctx, &mut out),
            Experiment::Crossing => crossing(ctx, &mut out),
            Experiment::Dynamics => run_dynamics(ctx, &mut out),
            Experiment::FidelitySweep => fidelity_sweep(ctx, &mut out),
            Experiment::SplittingCompare => splitting_compare(ctx, &mut out),
            Experiment::Flux if ctx.preset == "sec6" => flux_sec6(ctx, &mut out),
            Experiment::Flux => flux_fig9(ctx, &mut out),
            Experiment::CircuitMap => circuit_map(ctx, &mut out),
            Experiment::ThreeLevel => three_level(ctx, &mut out),
            Experiment::Selftest => selftest(ctx, &mut out),
        }?;
        Ok(out)
    }
}

fn space(p: &ParamSet) -> Result<HilbertSpace> {
    Ok(HilbertSpace::two_level(p.usize("fock_cutoff"))?)
}

fn indices(p: &ParamSet, key: &str) -> Result<Vec<usize>> {
    p.floats(key)
        .into_iter()
        .map(|v| {
            if v >= 0.0 && v.fract() == 0.0 {
                Ok(v as usize)
            } else {
                Err(anyhow!("`{key}` entries must be non-negative integers, got {v}"))
            }
        })
        .collect()
}

/// `auto` or a number.
fn auto_or(p: &ParamSet, key: &str) -> Result<Option<f64>> {
    let s = p.text(key);
    if s == "auto" {
        return Ok(None);
    }
    let v: f64 = s.parse().map_err(|_| anyhow!("`{key}` must be `auto` or a number, got `{s}`"))?;
    if !(v.is_finite() && v > 0.0) {
        bail!("`{key}` must be positive, got {v}");
    }
    Ok(Some(v))
}

fn method(p: &ParamSet) -> Result<MasterMethod> {
    match p.text("method") {
        "stroboscopic" => Ok(MasterMethod::Stroboscopic),
        "direct" => Ok(MasterMethod::Direct),
        other => bail!("`method` must be stroboscopic or direct, got `{other}`"),
    }
}

fn sweep(centre: f64, half_width: f64, points: usize) -> Vec<f64> {
    if points <= 1 {
        return vec![centre];
    }
    (0..points).map(|k| centre - half_width + 2.0 * half_width * k as f64 / (points - 1) as f64).collect()
}

fn spectrum_table(scan: &spectral::SpectrumScan) -> Table {
    let mut columns = vec![col("omega_c", "omega0")];
    columns.extend(scan.level_indices.iter().map(|l| col(format!("E_{l}"), "omega0")));
    let mut t = Table::new(columns);
    for (w, row) in scan.sweep_values.iter().zip(&scan.energies) {
        let mut cells = vec![Cell::Num(*w)];
        cells.extend(row.iter().map(|&e| Cell::Num(e)));
        t.push(cells);
    }
    t
}

fn spectrum(ctx: &RunContext, out: &mut Artifacts) -> Result<()> {
    let p = &ctx.params;
    let space = space(p)?;
    let template = EffectiveParams::new(p.f64("omega0"), p.f64("omega_c_centre"), p.f64("lambda"), p.f64("x"))?;
    let values = sweep(p.f64("omega_c_centre"), p.f64("half_width"), p.usize("points"));
    let scan = scan_spectrum(&template, &space, &values, &indices(p, "levels")?)?;
    out.line(format!("sweep points: {}", values.len()));
    out.line(format!("degenerate samples: {}", scan.degeneracies.len()));
    let levels = &scan.level_indices;
    for m in 1..levels.len() {
        let (k, gap) = scan
            .energies
            .iter()
            .enumerate()
            .map(|(k, row)| (k, row[m] - row[m - 1]))
            .fold((0, f64::INFINITY), |b, c| if c.1 < b.1 { c } else { b });
        out.line(format!(
            "min gap E_{} - E_{}: {gap:.10e} at omega_c = {:.12}",
            levels[m],
            levels[m - 1],
            scan.sweep_values[k]
        ));
    }
    out.table("spectrum.csv", spectrum_table(&scan));
    Ok(())
}

fn crossing(ctx: &RunContext, out: &mut Artifacts) -> Result<()> {
    use reference::*;
    let p = &ctx.params;
    let space = space(p)?;
    let omega0 = p.f64("omega0");
    let x = p.f64("x");
    let half = p.f64("bracket_half_width");
    let mut table = Table::new(vec![
        col("lambda", "omega0"),
        col("omega_c_star", "omega0"),
        col("splitting", "omega0"),
        col("analytic_omega_c", "omega0"),
        col("analytic_splitting", "omega0"),
        col("splitting_difference", "percent"),
        col("F_B", ""),
        col("F_C", ""),
        col("lower_state", ""),
        col("orthogonality_defect", ""),
    ]);
    let mut overlaps = Vec::new();
    for lambda in p.floats("lambdas") {
        let template = EffectiveParams::new(omega0, omega0 / 3.0, lambda, x)?;
        let centre = resonance_position(lambda / omega0, x) * omega0;
        let r = locate_crossing(&template, &space, Some((centre - half, centre + half)))
            .with_context(|| format!("locating the crossing at lambda = {lambda}"))?;
        let analytic = analytics::analytic_report(omega0, lambda, x)?;
        let at = template.with_omega_c(r.omega_c_star)?;
        let analytic_splitting = 2.0 * analytics::rabi_frequency_eff(&at)?;
        let diff = 100.0 * (analytic_splitting - r.splitting).abs() / r.splitting;
        let lower = if r.lower_is_b { "B" } else { "C" };
        table.push(vec![
            lambda.into(),
            r.omega_c_star.into(),
            r.splitting.into(),
            (analytic.omega_c_prime_ratio * omega0).into(),
            analytic_splitting.into(),
            diff.into(),
            r.f_b.into(),
            r.f_c.into(),
            lower.into(),
            r.orthogonality_defect.into(),
        ]);
        out.line(format!(
            "lambda {lambda}: omega_c* = {:.11}, splitting = {:.6e}, F_B = {:.6}, F_C = {:.6}, lower eigenstate ~ {lower}",
            r.omega_c_star, r.splitting, r.f_b, r.f_c
        ));
        overlaps.push((lambda, r.f_b, r.f_c));
        let points = p.usize("scan_points");
        if points > 0 {
            let lo = r.lower_index.saturating_sub(1);
            let hi = (r.upper_index + 1).min(space.dim() - 1);
            let levels: Vec<usize> = (lo..=hi).collect();
            let scan = scan_spectrum(&template, &space, &sweep(r.omega_c_star, p.f64("scan_half_width"), points), &levels)?;
            out.table(format!("spectrum_lambda{lambda}.csv"), spectrum_table(&scan));
        }
        if ctx.preset == "fig3" && lambda == presets::LAMBDA && omega0 == 1.0 && x == presets::X {
            out.check(
                format!("omega_c* within {FIG3_OMEGA_C_TOL:e} of {FIG3_OMEGA_C}"),
                (r.omega_c_star - FIG3_OMEGA_C).abs() <= FIG3_OMEGA_C_TOL,
                false,
            );
            out.check(
                format!("splitting within {}% of {FIG3_SPLITTING:e}", 100.0 * FIG3_SPLITTING_REL_TOL),
                (r.splitting / FIG3_SPLITTING - 1.0).abs() <= FIG3_SPLITTING_REL_TOL,
                false,
            );
            let pos_rel = (analytic.omega_c_prime_ratio * omega0 / r.omega_c_star - 1.0).abs();
            out.check(format!("closed-form position relative error {pos_rel:.3e} <= {ANALYTIC_POSITION_REL_TOL:e}"), pos_rel <= ANALYTIC_POSITION_REL_TOL, false);
            out.check(
                format!("closed-form splitting within {}% ({diff:.4}%)", 100.0 * ANALYTIC_SPLITTING_REL_TOL),
                diff <= 100.0 * ANALYTIC_SPLITTING_REL_TOL,
                false,
            );
            out.check(format!("F_B, F_C >= {MIN_OVERLAP}"), r.f_b >= MIN_OVERLAP && r.f_c >= MIN_OVERLAP, false);
        }
    }
    if ctx.preset == "fig4" && overlaps.len() > 1 {
        let monotone = overlaps.windows(2).all(|w| w[1].1 < w[0].1 && w[1].2 < w[0].2);
        out.check("F_B and F_C decrease monotonically with lambda", monotone, false);
    }
    out.table("crossing.csv", table);
    Ok(())
}

fn trajectory_table(rec: &TrajectoryRecord) -> Table {
    let mut columns = vec![col("t", "1/omega0")];
    columns.extend(rec.channel_names.iter().map(|n| col(n.clone(), "")));
    columns.push(col("norm", ""));
    let mut t = Table::new(columns);
    for k in 0..rec.times.len() {
        let mut row = vec![Cell::Num(rec.times[k])];
        row.extend(rec.probabilities.iter().map(|c| Cell::Num(c[k])));
        row.push(Cell::Num(rec.norm[k]));
        t.push(row);
    }
    t
}

fn max_channel(rec: &TrajectoryRecord, ch: &Channel) -> (f64, f64) {
    rec.max_of(&ch.name()).unwrap_or((0.0, 0.0))
}

fn run_dynamics(ctx: &RunContext, out: &mut Artifacts) -> Result<()> {
    use reference::*;
    let p = &ctx.params;
    let space = space(p)?;
    let lambda = p.f64("lambda");
    let x = p.f64("x");
    let omega0_lab = p.f64("omega0_lab");
    let order = p.usize("order");
    let samples = p.usize("samples");
    let template = EffectiveParams::new(1.0, 1.0 / 3.0, lambda, x)?;
    let given_omega_c = auto_or(p, "omega_c")?;
    let given_t = auto_or(p, "t_final")?;
    let psi0 = space.basis_state(E0)?;
    let channels = default_two_level_channels();
    let g3 = Channel::Basis(G3);
    let mut summary = Table::new(vec![
        col("model", ""),
        col("lambda", "omega0"),
        col("omega_c", "omega0"),
        col("t_final", "1/omega0"),
        col("max_P(g,3)", ""),
        col("t_at_max", "1/omega0"),
        col("min_P(e,0)+P(g,3)", ""),
        col("max_norm_drift", ""),
    ]);
    let min_pair = |rec: &TrajectoryRecord| {
        (0..rec.times.len()).map(|k| rec.probabilities[0][k] + rec.probabilities[1][k]).fold(f64::INFINITY, f64::min)
    };

    // effective anisotropic Rabi model, exact exponential stepping
    let eff_template = template.with_lambda(p.f64("effective_lambda"))?;
    let eff_crossing = locate_crossing(&eff_template, &space, None)?;
    let eff = eff_template.with_omega_c(given_omega_c.unwrap_or(eff_crossing.omega_c_star))?;
    let t_eff = given_t.unwrap_or(2.0 * PI / eff_crossing.splitting);
    let evo = ExactEvolution::new(&anisotropic_rabi(&space, &eff)?)?;
    let rec = evo.trajectory(Some(&space), &psi0, &dynamics::uniform_times(t_eff, samples), &channels)?;
    let (max_g3, t_max) = max_channel(&rec, &g3);
    let min_sum = min_pair(&rec);
    summary.push(vec![
        "effective".into(),
        eff.lambda.into(),
        eff.omega_c.into(),
        t_eff.into(),
        max_g3.into(),
        t_max.into(),
        min_sum.into(),
        rec.max_norm_drift().into(),
    ]);
    out.line(format!("effective model: lambda = {}, omega_c = {:.11}, t_final = {t_eff:.6e}", eff.lambda, eff.omega_c));
    out.line(format!("effective model: max P(g,3) = {max_g3:.6} at t = {t_max:.6e}; min P(e,0)+P(g,3) = {min_sum:.6}"));
    if given_omega_c.is_none() {
        out.check(format!("effective max P(g,3) >= {EFFECTIVE_MIN_FIDELITY}"), max_g3 >= EFFECTIVE_MIN_FIDELITY, false);
        out.check(format!("effective min P(e,0)+P(g,3) >= {EFFECTIVE_MIN_FIDELITY}"), min_sum >= EFFECTIVE_MIN_FIDELITY, false);
    }
    out.table("effective.csv", trajectory_table(&rec));

    // sideband-expanded model, stroboscopic Floquet stepping
    let (omega_c_rot, t_rot) = match given_omega_c {
        Some(w) => (w, given_t.unwrap_or(2.0 * PI / locate_crossing(&template, &space, None)?.splitting)),
        None => {
            let r = rotating_frame_resonance(&space, &template, omega0_lab, order)?;
            out.line(format!("sideband model: quasienergy resonance at omega_c = {:.11}, splitting {:.6e}", r.omega_c_star, r.splitting));
            (r.omega_c_star, given_t.unwrap_or(2.0 * PI / r.splitting))
        }
    };
    let eff_rot = template.with_omega_c(omega_c_rot)?;
    let rec = rotating_frame_run(&space, &eff_rot, omega0_lab, order, t_rot, samples)?;
    let (max_rot, t_max) = max_channel(&rec, &g3);
    summary.push(vec![
        "sideband".into(),
        lambda.into(),
        omega_c_rot.into(),
        t_rot.into(),
        max_rot.into(),
        t_max.into(),
        min_pair(&rec).into(),
        rec.max_norm_drift().into(),
    ]);
    out.line(format!("sideband model (order {order}): lambda = {lambda}, omega_c = {omega_c_rot:.11}, t_final = {t_rot:.6e}"));
    out.line(format!("sideband model: max P(g,3) = {max_rot:.6} at t = {t_max:.6e}; norm drift {:.3e}", rec.max_norm_drift()));
    if ctx.long_run {
        out.check(
            format!("long-run max P(g,3) = {LONG_RUN_FIDELITY} +- {LONG_RUN_FIDELITY_TOL}"),
            (max_rot - LONG_RUN_FIDELITY).abs() <= LONG_RUN_FIDELITY_TOL,
            false,
        );
    } else if given_omega_c.is_none() {
        out.check(format!("sideband max P(g,3) >= {ROTATING_MIN_FIDELITY}"), max_rot >= ROTATING_MIN_FIDELITY, false);
    }
    out.table("rotating.csv", trajectory_table(&rec));

    if p.bool("frame_check") {
        let frame_lambda = p.f64("frame_lambda");
        let t = EffectiveParams::new(1.0, 1.0 / 3.0, frame_lambda, x)?;
        let w = locate_crossing(&t, &space, None)?.omega_c_star;
        let lab = from_effective(1.0, w, x, omega0_lab, frame_lambda)?;
        let d = frame_equivalence(&space, &lab, order, p.f64("frame_t_final"), p.f64("frame_steps"))?;
        out.line(format!(
            "frame check (lambda {frame_lambda}, t <= {}): max channel difference {d:.3e}",
            p.f64("frame_t_final")
        ));
        out.check(format!("frame equivalence <= {FRAME_EQUIVALENCE_TOL:e}"), d <= FRAME_EQUIVALENCE_TOL, false);
        let mut t = Table::new(vec![
            col("lambda", "omega0"),
            col("omega_c_lab", "omega0"),
            col("t_final", "1/omega0"),
            col("steps_per_period", ""),
            col("max_difference", ""),
        ]);
        t.push(vec![frame_lambda.into(), lab.omega_c.into(), p.f64("frame_t_final").into(), p.f64("frame_steps").into(), d.into()]);
        out.table("frame_check.csv", t);
    }
    out.table("dynamics_summary.csv", summary);
    Ok(())
}

fn fidelity_sweep(ctx: &RunContext, out: &mut Artifacts) -> Result<()> {
    use reference::*;
    let p = &ctx.params;
    let space = space(p)?;
    let snapshot = match p.text("snapshot") {
        "first-maximum" => SnapshotConvention::FirstMaximum,
        "half-rabi-period" => SnapshotConvention::HalfRabiPeriod,
        s => SnapshotConvention::Fixed(
            s.parse().map_err(|_| anyhow!("`snapshot` must be first-maximum, half-rabi-period or a time, got `{s}`"))?,
        ),
    };
    let xs = p.floats("xs");
    let sweep = fidelity_vs_x(&xs, p.f64("lambda"), &space, snapshot)?;
    out.line(format!("snapshot time: {:.10e}", sweep.snapshot_time));
    let mut table = Table::new(vec![col("x", ""), col("omega_c_star", "omega0"), col("fidelity", ""), col("error", "")]);
    for row in &sweep.rows {
        match &row.outcome {
            Ok((w, f)) => table.push(vec![row.x.into(), (*w).into(), (*f).into(), "".into()]),
            Err(e) => {
                out.line(format!("x = {}: {e}", row.x));
                table.push(vec![row.x.into(), f64::NAN.into(), f64::NAN.into(), e.to_string().into()]);
            }
        }
    }
    out.table("fidelity.csv", table);
    let peak = sweep.peak().ok_or_else(|| anyhow!("no modulation depth produced a fidelity"))?;
    out.line(format!("peak: x = {}, fidelity {:.6}", peak.0, peak.1));
    out.check(
        format!("peak within x in [{}, {}]", FIDELITY_PEAK_X.0, FIDELITY_PEAK_X.1),
        (FIDELITY_PEAK_X.0..=FIDELITY_PEAK_X.1).contains(&peak.0),
        false,
    );
    if let Some(Ok((_, f))) = sweep.rows.iter().find(|r| (r.x - 0.5).abs() < 1e-12).map(|r| &r.outcome) {
        out.check(format!("fidelity at x = 0.5 ({f:.6}) > {FIDELITY_AT_HALF}"), *f > FIDELITY_AT_HALF, false);
    }
    Ok(())
}

fn splitting_compare(ctx: &RunContext, out: &mut Artifacts) -> Result<()> {
    use reference::*;
    let p = &ctx.params;
    let space = space(p)?;
    let rows = analytics::compare_splitting(&p.floats("lambdas"), p.f64("x"), &space)?;
    let mut table = Table::new(vec![
        col("lambda", "omega0"),
        col("omega_c_star", "omega0"),
        col("numeric_splitting", "omega0"),
        col("analytic_splitting", "omega0"),
        col("difference", "percent"),
    ]);
    for r in &rows {
        table.push(vec![r.lambda.into(), r.omega_c_star.into(), r.numeric.into(), r.analytic.into(), r.percent_difference.into()]);
    }
    out.table("splitting.csv", table);
    let small: Vec<_> = rows.iter().filter(|r| r.lambda < SPLITTING_LAMBDA_LIMIT).collect();
    let worst = small.iter().map(|r| r.percent_difference).fold(0.0, f64::max);
    out.line(format!("largest difference below lambda = {SPLITTING_LAMBDA_LIMIT}: {worst:.4}%"));
    if !small.is_empty() {
        out.check(format!("every lambda < {SPLITTING_LAMBDA_LIMIT} within {SPLITTING_PERCENT_LIMIT}%"), worst < SPLITTING_PERCENT_LIMIT, false);
    }
    if small.len() >= 2 {
        let lx: Vec<f64> = small.iter().map(|r| r.lambda).collect();
        let ly: Vec<f64> = small.iter().map(|r| r.numeric).collect();
        let slope = spectral::log_log_slope(&lx, &ly);
        out.line(format!("log-log slope of the numeric splitting (lambda < {SPLITTING_LAMBDA_LIMIT}): {slope:.5}"));
        out.check(format!("slope {SLOPE} +- {SLOPE_TOL}"), (slope - SLOPE).abs() <= SLOPE_TOL, false);
    }
    Ok(())
}

fn flux_table(run: &FluxRun, hz: bool) -> Table {
    let tr = &run.trajectory;
    let mut columns = vec![col("t", if hz { "ns" } else { "1/omega0" }), col("flux", if hz { "1/ns" } else { "omega0" })];
    columns.push(col("cycle_averaged_flux", if hz { "1/ns" } else { "omega0" }));
    if hz {
        columns.push(col("cycle_averaged_flux", "Hz"));
    }
    columns.extend([col("trace", ""), col("min_eigenvalue", ""), col("hermiticity_defect", "")]);
    let mut t = Table::new(columns);
    for k in 0..tr.times.len() {
        let cyc = tr.cycle_flux.as_ref().map_or(tr.flux[k], |c| c[k]);
        let mut row = vec![Cell::Num(tr.times[k]), Cell::Num(tr.flux[k]), Cell::Num(cyc)];
        if hz {
            row.push(Cell::Num(presets::flux_to_hz(cyc)));
        }
        row.extend([Cell::Num(tr.trace[k]), Cell::Num(tr.min_eigenvalue[k]), Cell::Num(tr.hermiticity[k])]);
        t.push(row);
    }
    t
}

fn flux_fig9(ctx: &RunContext, out: &mut Artifacts) -> Result<()> {
    use reference::*;
    let p = &ctx.params;
    let rate = p.f64("rate");
    let mut runs = Vec::new();
    let mut summary = Table::new(vec![
        col("omega_f", "omega0"),
        col("steady_flux", "omega0"),
        col("drift", ""),
        col("window_start", "1/omega0"),
        col("late_window_integral", ""),
        col("max_trace_drift", ""),
        col("min_eigenvalue", ""),
    ]);
    for wf in p.floats("omega_fs") {
        let lab = if wf > 0.0 {
            LabFrameParams::new(p.f64("omega0_lab"), p.f64("omega_c_lab"), p.f64("lambda"), p.f64("x") * wf, wf)?
        } else {
            LabFrameParams::unmodulated(p.f64("omega0_lab"), p.f64("omega_c_lab"), p.f64("lambda"))?
        };
        let setup = FluxSetup {
            lab,
            dissipation: DissipationParams::new(rate, rate)?,
            fock_cutoff: p.usize("fock_cutoff"),
            t_final: p.f64("t_final"),
            samples: p.usize("samples"),
            method: method(p)?,
            dt: None,
        };
        let run = run_flux(&setup).with_context(|| format!("flux run at omega_f = {wf}"))?;
        let s = run.steady;
        let late = run.trajectory.integrated_flux(s.window_start);
        out.line(format!(
            "omega_f = {wf}: steady flux {:.6e} (drift {:.3e}), late-window integral {late:.6e}, trace drift {:.3e}, min eigenvalue {:.3e}",
            s.value,
            s.drift,
            run.trajectory.max_trace_drift(),
            run.trajectory.min_eigenvalue()
        ));
        out.table(format!("flux_omega_f{wf}.csv"), flux_table(&run, false));
        summary.push(vec![
            wf.into(),
            s.value.into(),
            s.drift.into(),
            s.window_start.into(),
            late.into(),
            run.trajectory.max_trace_drift().into(),
            run.trajectory.min_eigenvalue().into(),
        ]);
        runs.push((wf, run, late));
    }
    out.table("flux_summary.csv", summary);
    let trace = runs.iter().map(|r| r.1.trajectory.max_trace_drift()).fold(0.0, f64::max);
    out.check(format!("trace drift {trace:.3e} <= {TRACE_TOL:e}"), trace <= TRACE_TOL, false);
    if ctx.preset == "fig9" && runs.len() == 3 && runs[0].0 == 0.0 {
        let (off, res, far) = (&runs[0], &runs[1], &runs[2]);
        let ratio_a = off.2.abs() / res.2;
        out.check(
            format!("unmodulated late-window flux / resonant = {ratio_a:.3e} < {UNMODULATED_FLUX_RATIO:e}"),
            ratio_a < UNMODULATED_FLUX_RATIO,
            false,
        );
        out.check(
            format!("resonant flux stationary (drift {:.3e} < {})", res.1.steady.drift, fmqrm_core::open_system::STATIONARY_DRIFT),
            res.1.steady.converged,
            false,
        );
        let ratio_c = (far.1.steady.value - off.1.steady.value).abs() / res.1.steady.value;
        out.check(
            format!("|far-detuned - unmodulated| / resonant = {ratio_c:.3e} < {FAR_DETUNED_FLUX_RATIO:e}"),
            ratio_c < FAR_DETUNED_FLUX_RATIO,
            false,
        );
    }
    Ok(())
}

fn unit_readings(p: &ParamSet) -> Result<Vec<UnitReading>> {
    p.text("units")
        .split(',')
        .map(|s| UnitReading::parse(s.trim()).ok_or_else(|| anyhow!("unknown unit reading `{}` (mixed or angular)", s.trim())))
        .collect()
}

fn flux_sec6(ctx: &RunContext, out: &mut Artifacts) -> Result<()> {
    use reference::*;
    let p = &ctx.params;
    let mut summary = Table::new(vec![
        col("units", ""),
        col("kappa", "1/ns"),
        col("steady_flux", "1/ns"),
        col("steady_flux", "Hz"),
        col("drift", ""),
        col("max_trace_drift", ""),
    ]);
    for units in unit_readings(p)? {
        let mut setup = presets::sec6(units)?;
        setup.fock_cutoff = p.usize("fock_cutoff");
        setup.samples = p.usize("samples");
        setup.method = method(p)?;
        setup.t_final = p.f64("relaxation_times") / setup.dissipation.kappa;
        let run = run_flux(&setup)?;
        let hz = presets::flux_to_hz(run.steady.value);
        out.line(format!(
            "{} reading: kappa = {:.6e} /ns, steady flux {:.6e} /ns = {hz:.4} Hz (drift {:.3e}), trace drift {:.3e}",
            units.name(),
            setup.dissipation.kappa,
            run.steady.value,
            run.steady.drift,
            run.trajectory.max_trace_drift()
        ));
        out.check(
            format!("{} reading within {}% of {} Hz", units.name(), 100.0 * SEC6_FLUX_REL_TOL, presets::SEC6_FLUX_HZ),
            (hz / presets::SEC6_FLUX_HZ - 1.0).abs() <= SEC6_FLUX_REL_TOL,
            false,
        );
        out.table(format!("flux_sec6_{}.csv", units.name()), flux_table(&run, true));
        summary.push(vec![
            units.name().into(),
            setup.dissipation.kappa.into(),
            run.steady.value.into(),
            hz.into(),
            run.steady.drift.into(),
            run.trajectory.max_trace_drift().into(),
        ]);
    }
    out.table("flux_summary.csv", summary);
    Ok(())
}

fn ghz(e: f64) -> f64 {
    e / (PLANCK * 1e9)
}

fn circuit_map(ctx: &RunContext, out: &mut Artifacts) -> Result<()> {
    let p = &ctx.params;
    let n = u32::try_from(p.usize("n")).context("`n` too large")?;
    let given = CircuitParams {
        e_j: circuit::energy_from_ghz(p.f64("e_j_ghz")),
        c_j: p.f64("c_j_ff") * 1e-15,
        e_jk: circuit::energy_from_ghz(p.f64("e_jk_ghz")),
        c_jk: p.f64("c_jk_ff") * 1e-15,
        n,
        l_res: p.f64("l_res_nh") * 1e-9,
        c_res: p.f64("c_res_ff") * 1e-15,
        c_i: p.f64("c_i_ff") * 1e-15,
        phi0: circuit::FLUX_QUANTUM,
        flux_drive: FluxDrive { amplitude: 0.0, phase_rate: p.f64("phase_rate") },
    };
    given.validate()?;
    let mut rows: Vec<(String, f64, &'static str)> = Vec::new();
    let c = if p.bool("fit") {
        let units = UnitReading::parse(p.text("units")).ok_or_else(|| anyhow!("`units` must be mixed or angular"))?;
        let targets = presets::sec6_circuit_targets(units)?;
        out.line(format!("fitting to the {} reading of the circuit-scale model parameters", units.name()));
        for (k, v) in [
            ("target_omega0", targets.omega0),
            ("target_omega_c", targets.omega_c),
            ("target_lambda", targets.lambda),
            ("target_amplitude", targets.amplitude),
            ("target_omega_f", targets.omega_f),
        ] {
            rows.push((k.into(), v, "rad/ns"));
        }
        let fitted = circuit::fit_circuit(&given, &targets)?;
        let m = circuit::map_to_model(&fitted)?;
        let worst = [
            m.omega0 / targets.omega0,
            m.omega_c / targets.omega_c,
            m.lambda / targets.lambda,
            m.amplitude / targets.amplitude,
            m.omega_f / targets.omega_f,
        ]
        .iter()
        .map(|r| (r - 1.0).abs())
        .fold(0.0, f64::max);
        out.check(format!("fitted circuit reproduces every target (worst relative error {worst:.2e})"), worst < 1e-9, true);
        fitted
    } else {
        given
    };
    let d = circuit::derive_energies(&c)?;
    let m = circuit::map_to_model(&c)?;
    rows.extend([
        ("E_J".into(), ghz(c.e_j), "GHz"),
        ("C_J".into(), c.c_j * 1e15, "fF"),
        ("E_JK".into(), ghz(c.e_jk), "GHz"),
        ("C_JK".into(), c.c_jk * 1e15, "fF"),
        ("N".into(), c.n as f64, ""),
        ("L_res".into(), c.l_res * 1e9, "nH"),
        ("C_res".into(), c.c_res * 1e15, "fF"),
        ("C_i".into(), c.c_i * 1e15, "fF"),
        ("flux_phase_rate".into(), c.flux_drive.phase_rate, "rad/ns"),
        ("E_C_phi".into(), ghz(d.e_c_phi), "GHz"),
        ("E_C_theta".into(), ghz(d.e_c_theta), "GHz"),
        ("E_C_int".into(), ghz(d.e_c_int), "GHz"),
        ("E_L".into(), ghz(d.e_l), "GHz"),
        ("omega_KPO".into(), d.omega_kpo, "rad/ns"),
        ("omega_LC".into(), d.omega_lc, "rad/ns"),
        ("phi_0".into(), d.phi_0, ""),
        ("theta_0".into(), d.theta_0, ""),
        ("kerr_coefficient".into(), ghz(circuit::kerr_coefficient(&c, &d)), "GHz"),
        ("omega0".into(), m.omega0, "rad/ns"),
        ("omega_c".into(), m.omega_c, "rad/ns"),
        ("lambda".into(), m.lambda, "rad/ns"),
        ("delta_b".into(), m.delta_b, "rad/ns"),
        ("amplitude".into(), m.amplitude, "rad/ns"),
        ("omega_f".into(), m.omega_f, "rad/ns"),
    ]);
    out.line(format!(
        "model: omega0 = {:.6} rad/ns, omega_c = {:.6} rad/ns, lambda = {:.6e} rad/ns, delta_b = {:.6e} rad/ns, A = {:.6} rad/ns, omega_f = {:.6} rad/ns",
        m.omega0, m.omega_c, m.lambda, m.delta_b, m.amplitude, m.omega_f
    ));
    let mut table = Table::new(vec![col("quantity", ""), col("value", ""), col("unit", "")]);
    for (k, v, u) in rows {
        table.push(vec![k.into(), v.into(), u.into()]);
    }
    out.table("circuit.csv", table);
    Ok(())
}

fn three_level(ctx: &RunContext, out: &mut Artifacts) -> Result<()> {
    use reference::*;
    let p = &ctx.params;
    let setup = LeakageSetup {
        lambda: p.f64("lambda"),
        x: p.f64("x"),
        omega0_lab: p.f64("omega0_lab"),
        delta_b_over_delta: p.f64("delta_b_over_delta"),
        delta_b_over_delta_prime: p.f64("delta_b_over_delta_prime"),
        fock_cutoff: p.usize("fock_cutoff"),
        samples: p.usize("samples"),
    };
    let mut summary = Table::new(vec![
        col("run", ""),
        col("delta_b", "omega0"),
        col("max_P(g,3)", ""),
        col("max_P_f", ""),
        col("two_level_max_P(g,3)", ""),
    ]);
    for modulated in [true, false] {
        let run = three_level_leakage(modulated, &setup)?;
        let tag = if modulated { "modulated" } else { "unmodulated" };
        out.line(format!(
            "{tag}: delta_b = {:.6e}, max P(g,3) = {:.6}, max P_f = {:.3e}, two-level max P(g,3) = {:.6}",
            run.params.delta_b(),
            run.max_g3(),
            run.max_f(),
            run.two_level_max
        ));
        if modulated {
            out.check(format!("modulated max P_f < {LEAKAGE_MAX_F}"), run.max_f() < LEAKAGE_MAX_F, false);
            out.check(format!("modulated max P(g,3) > {LEAKAGE_MIN_G3}"), run.max_g3() > LEAKAGE_MIN_G3, false);
        } else {
            out.check(
                format!("unmodulated max P(g,3) < {UNMODULATED_G3_FRACTION} x two-level value"),
                run.max_g3() < UNMODULATED_G3_FRACTION * run.two_level_max,
                false,
            );
        }
        out.table(format!("three_level_{tag}.csv"), trajectory_table(&run.record));
        summary.push(vec![tag.into(), run.params.delta_b().into(), run.max_g3().into(), run.max_f().into(), run.two_level_max.into()]);
    }
    out.table("three_level_summary.csv", summary);
    Ok(())
}

fn random_matrix(rng: &mut ChaCha8Rng, n: usize) -> ComplexMatrix {
    ComplexMatrix::from_fn(n, n, |_, _| c64(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
}

fn random_hermitian(rng: &mut ChaCha8Rng, n: usize) -> ComplexMatrix {
    let a = random_matrix(rng, n);
    (&a + &a.adjoint()).scale_real(0.5)
}

fn random_state(rng: &mut ChaCha8Rng, n: usize) -> StateVector {
    StateVector((0..n).map(|_| c64(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))).collect()).normalized()
}

/// Tolerances of the self-test checks.
pub mod selftest_tol {
    pub const EIGEN_RECONSTRUCTION: f64 = 1e-10;
    pub const BESSEL_COMPLETENESS: f64 = 1e-12;
    pub const LINDBLAD_TRACE: f64 = 1e-12;
    pub const FRAME_ROUND_TRIP: f64 = 1e-14;
    pub const NORM_DRIFT: f64 = 1e-6;
}

fn selftest(ctx: &RunContext, out: &mut Artifacts) -> Result<()> {
    use selftest_tol::*;
    let p = &ctx.params;
    let trials = p.usize("trials");
    let n = p.usize("dim");
    if n < 2 {
        bail!("`dim` must be at least 2");
    }
    let mut rng = ChaCha8Rng::seed_from_u64(ctx.seed);
    out.line(format!("seed {}, {trials} trials, dimension {n}", ctx.seed));
    let mut worst = [0.0f64; 5];
    for _ in 0..trials {
        let h = random_hermitian(&mut rng, n);
        let eig = eig_hermitian(&h)?;
        worst[0] = worst[0].max(eig.reconstruct().max_abs_diff(&h));

        let x: f64 = rng.gen_range(0.0..BESSEL_X_LIMIT);
        let j = bessel_j_orders(60, x)?;
        let sum = j[0] * j[0] + 2.0 * j[1..].iter().map(|v| v * v).sum::<f64>();
        worst[1] = worst[1].max((sum - 1.0).abs());

        let b = random_matrix(&mut rng, n);
        let mut r = b.matmul(&b.adjoint());
        let tr = r.trace().re;
        r = r.scale_real(1.0 / tr);
        let rho = DensityMatrix::new(r)?;
        let (x1, x2) = (random_matrix(&mut rng, n), random_matrix(&mut rng, n));
        let d = DissipationParams::new(rng.gen_range(0.0..1.0), rng.gen_range(0.0..1.0))?;
        worst[2] = worst[2].max(lindblad_rhs(&rho, &h, &x1, &x2, &d)?.trace().norm());

        let rates: Vec<f64> = (0..n).map(|_| rng.gen_range(-10.0..10.0)).collect();
        let frame = RotatingFrame::static_rates(rates, None);
        let psi = random_state(&mut rng, n);
        let t: f64 = rng.gen_range(0.0..100.0);
        let back = frame.from_lab(t, &frame.to_lab(t, &psi.0));
        worst[3] = worst[3].max(back.iter().zip(&psi.0).map(|(a, b): (&C64, &C64)| (a - b).norm()).fold(0.0, f64::max));
    }
    // one longer propagation checks norm conservation of the RK4 stepper
    let op = TimeDependentOperator::from_static(random_hermitian(&mut rng, n))?;
    let g = Generator::lab(&op);
    let psi0 = random_state(&mut rng, n);
    let rec = dynamics::propagate(&g, None, &psi0, &PropagationConfig::rk4(50.0, 100), &[])?;
    worst[4] = rec.max_norm_drift();

    let labels = [
        ("eigen_reconstruction", EIGEN_RECONSTRUCTION),
        ("bessel_completeness", BESSEL_COMPLETENESS),
        ("lindblad_trace", LINDBLAD_TRACE),
        ("frame_round_trip", FRAME_ROUND_TRIP),
        ("rk4_norm_drift", NORM_DRIFT),
    ];
    let mut table = Table::new(vec![col("check", ""), col("worst_defect", ""), col("tolerance", ""), col("passed", "")]);
    for ((name, tol), w) in labels.iter().zip(worst) {
        let ok = w <= *tol;
        table.push(vec![(*name).into(), w.into(), (*tol).into(), ok.into()]);
        out.check(format!("{name}: {w:.3e} <= {tol:e}"), ok, true);
    }
    out.table("selftest.csv", table);
    Ok(())
}
