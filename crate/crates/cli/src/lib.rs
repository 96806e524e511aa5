//! `puzzlekit` command line: portraits, puzzles, nests, comparisons and
//! the inequality harness, reported as versioned JSON with optional SVG.

mod report;
mod svg;

use std::path::{Path, PathBuf};
use std::sync::Arc as Shared;

use clap::{Args, Parser, Subcommand, ValueEnum};
use num_complex::Complex;
use serde_json::{json, Value};

use puzzlekit::dynamics::{self, RayOptions};
use puzzlekit::lab::{self, NestFragment};
use puzzlekit::nest::{self, NestStop};
use puzzlekit::{
    Angle, Combinatorics, Complex64, Error, FixedPointInfo, GridKind, Label, ModulusOptions, Parameter, Puzzle,
    PuzzleConfig, SymbolicPuzzle,
};

pub use report::{round_sig, Warning, SCHEMA};
use report::{angle_json, complex_json, label_json, num, portrait_json};

/// Exit codes.
pub const EXIT_OK: i32 = 0;
pub const EXIT_CHECK_FAILED: i32 = 1;
pub const EXIT_DOMAIN: i32 = 2;
pub const EXIT_INCONCLUSIVE: i32 = 3;

#[derive(Parser, Debug)]
#[command(name = "puzzlekit", version, about = "Yoccoz puzzles of z^d + c")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub config: RunConfig,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Rays landing at the dividing fixed point.
    Portrait,
    /// Puzzle pieces up to `--depth` (default 6).
    Puzzle,
    /// Favorite nest of the critical puzzle pieces.
    Nest {
        /// Number of nest levels.
        #[arg(long, default_value_t = 5)]
        levels: usize,
        /// Also measure the moduli of `Q^i \ P^i`.
        #[arg(long)]
        moduli: bool,
    },
    /// Combinatorics of two parameters side by side.
    Compare {
        #[arg(long, value_parser = parse_complex, allow_hyphen_values = true)]
        c2: Complex64,
        #[arg(long, value_parser = parse_angle)]
        seed_angle2: Option<Angle>,
        /// Nest levels used for the moduli floors.
        #[arg(long, default_value_t = 3)]
        levels: usize,
        #[arg(long)]
        skip_moduli: bool,
        /// Depth up to which value labels are also checked by point location.
        #[arg(long, default_value_t = 4)]
        geometric_depth: usize,
    },
    /// Modulus inequalities along the favorite nest.
    Verify {
        #[arg(long, default_value_t = 4)]
        levels: usize,
        /// Off-centre return domains examined per `m(Q)` estimate.
        #[arg(long, default_value_t = 8)]
        domains: usize,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum GridArg {
    Cartesian,
    LogPolar,
}

impl From<GridArg> for GridKind {
    fn from(g: GridArg) -> Self {
        match g {
            GridArg::Cartesian => GridKind::Cartesian,
            GridArg::LogPolar => GridKind::LogPolar,
        }
    }
}

#[derive(Args, Clone, Debug)]
pub struct RunConfig {
    #[arg(long, default_value_t = 2, global = true)]
    pub degree: u32,
    /// Parameter `re,im`.
    #[arg(long, value_parser = parse_complex, allow_hyphen_values = true, global = true)]
    pub c: Option<Complex64>,
    /// Puzzle depth, comparison depth, or depth budget of the nest.
    #[arg(long, global = true)]
    pub depth: Option<usize>,
    #[arg(long, default_value_t = nest::DEFAULT_ORBIT_BUDGET, global = true)]
    pub orbit_budget: usize,
    /// Height of the depth-0 equipotential.
    #[arg(long, default_value_t = 1.0, global = true)]
    pub height: f64,
    /// Finest modulus grid.
    #[arg(long, default_value_t = 256, global = true)]
    pub grid: usize,
    #[arg(long, value_enum, default_value_t = GridArg::LogPolar, global = true)]
    pub grid_kind: GridArg,
    /// Longest ray cycle searched at the fixed point.
    #[arg(long, default_value_t = 10, global = true)]
    pub max_period: usize,
    /// Directory for report.json and SVG files.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true)]
    pub svg: bool,
    /// External angle `num/den` of the critical value.
    #[arg(long, value_parser = parse_angle, global = true)]
    pub seed_angle: Option<Angle>,
}

pub fn parse_complex(s: &str) -> Result<Complex64, String> {
    let (re, im) = s.split_once(',').ok_or_else(|| format!("expected re,im, got {s:?}"))?;
    let re: f64 = re.trim().parse().map_err(|e| format!("{re:?}: {e}"))?;
    let im: f64 = im.trim().parse().map_err(|e| format!("{im:?}: {e}"))?;
    if !(re.is_finite() && im.is_finite()) {
        return Err("parameter must be finite".into());
    }
    Ok(Complex::new(re, im))
}

pub fn parse_angle(s: &str) -> Result<Angle, String> {
    let (n, d) = s.split_once('/').ok_or_else(|| format!("expected num/den, got {s:?}"))?;
    let n: num_bigint::BigInt = n.trim().parse().map_err(|e| format!("{n:?}: {e}"))?;
    let d: num_bigint::BigInt = d.trim().parse().map_err(|e| format!("{d:?}: {e}"))?;
    Angle::new(n, d).map_err(|e| e.to_string())
}

impl RunConfig {
    fn validate(&self) -> Result<Complex64, Error> {
        if self.degree < 2 {
            return Err(Error::InvalidInput("--degree must be at least 2".into()));
        }
        if !(self.height > 0.0 && self.height.is_finite()) {
            return Err(Error::InvalidInput("--height must be positive".into()));
        }
        if self.orbit_budget == 0 || self.grid < 16 || self.max_period < 2 {
            return Err(Error::InvalidInput(
                "budgets must be positive, --grid at least 16, --max-period at least 2".into(),
            ));
        }
        self.c.ok_or_else(|| Error::InvalidInput("--c re,im is required".into()))
    }

    fn modulus_options(&self) -> ModulusOptions<f64> {
        ModulusOptions::for_grid(self.grid, self.grid_kind.into())
    }

    fn echo(&self) -> Value {
        json!({
            "degree": self.degree,
            "c": self.c.map(complex_json),
            "depth": self.depth,
            "orbit_budget": self.orbit_budget,
            "height": num(self.height),
            "grid": self.grid,
            "grid_kind": GridKind::from(self.grid_kind).name(),
            "max_period": self.max_period,
            "seed_angle": self.seed_angle.as_ref().map(angle_json),
            "check_slack": num(lab::CHECK_SLACK),
            "max_landing_gap": num(puzzlekit::puzzle::MAX_LANDING_GAP),
        })
    }
}

/// Outcome of one command: the report plus an exit code.
pub struct Outcome {
    pub report: Value,
    pub exit_code: i32,
    pub svg: Option<(String, String)>,
}

/// Exit code for an error that aborted a command.
pub fn exit_code_for(e: &Error) -> i32 {
    match e {
        Error::BudgetExhausted { .. }
        | Error::NeverEscapes { .. }
        | Error::RayLost { .. }
        | Error::NotLanded { .. }
        | Error::RootFindingFailed { .. }
        | Error::NonConvergence(_) => EXIT_INCONCLUSIVE,
        _ => EXIT_DOMAIN,
    }
}

fn error_json(e: &Error) -> Value {
    json!({ "kind": e.kind(), "message": e.to_string() })
}

/// Sets the rayon pool size from `PUZZLEKIT_THREADS`.
pub fn init_threads() {
    if let Some(n) = std::env::var("PUZZLEKIT_THREADS").ok().and_then(|s| s.trim().parse::<usize>().ok()) {
        if n > 0 {
            let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
        }
    }
}

/// Parses arguments, runs the command, writes outputs and returns the exit
/// code.
pub fn run<I, S>(args: I) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_DOMAIN } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    let outcome = execute(&cli);
    let text = serde_json::to_string_pretty(&outcome.report).expect("report serializes") + "\n";
    print!("{text}");
    if let Some(dir) = &cli.config.out {
        let written = std::fs::create_dir_all(dir)
            .and_then(|_| write_atomic(&dir.join("report.json"), &text))
            .and_then(|_| match &outcome.svg {
                Some((name, body)) => write_atomic(&dir.join(name), body),
                None => Ok(()),
            });
        if let Err(e) = written {
            eprintln!("puzzlekit: cannot write to {}: {e}", dir.display());
            return EXIT_DOMAIN;
        }
    }
    outcome.exit_code
}

fn write_atomic(path: &Path, body: &str) -> std::io::Result<()> {
    let tmp = path.with_extension("tmp");
    std::fs::write(&tmp, body)?;
    std::fs::rename(&tmp, path)
}

/// Runs the parsed command. Errors become part of the report.
pub fn execute(cli: &Cli) -> Outcome {
    let mut ctx = Ctx {
        warnings: Vec::new(),
        svg_wanted: cli.config.svg,
    };
    let cfg = &cli.config;
    let (name, result) = match &cli.command {
        Command::Portrait => ("portrait", cmd_portrait(cfg, &mut ctx)),
        Command::Puzzle => ("puzzle", cmd_puzzle(cfg, &mut ctx)),
        Command::Nest { levels, moduli } => ("nest", cmd_nest(cfg, *levels, *moduli, &mut ctx)),
        Command::Compare {
            c2,
            seed_angle2,
            levels,
            skip_moduli,
            geometric_depth,
        } => (
            "compare",
            cmd_compare(
                cfg,
                CompareArgs {
                    c2: *c2,
                    seed2: seed_angle2.clone(),
                    levels: *levels,
                    moduli: !*skip_moduli,
                    geometric_depth: *geometric_depth,
                },
                &mut ctx,
            ),
        ),
        Command::Verify { levels, domains } => ("verify", cmd_verify(cfg, *levels, *domains, &mut ctx)),
    };
    let mut report = json!({
        "schema": SCHEMA,
        "command": name,
        "config": cfg.echo(),
    });
    let (exit_code, svg) = match result {
        Ok(done) => {
            for (k, v) in done.fields {
                report[k] = v;
            }
            (done.exit_code, done.svg)
        }
        Err(e) => {
            report["error"] = error_json(&e);
            (exit_code_for(&e), None)
        }
    };
    report["warnings"] = Value::Array(ctx.warnings.iter().map(Warning::to_json).collect());
    report["exit_code"] = json!(exit_code);
    Outcome {
        report,
        exit_code,
        svg,
    }
}

struct Ctx {
    warnings: Vec<Warning>,
    svg_wanted: bool,
}

impl Ctx {
    fn warn(&mut self, w: Warning) {
        self.warnings.push(w);
    }
}

struct Done {
    fields: Vec<(&'static str, Value)>,
    exit_code: i32,
    svg: Option<(String, String)>,
}

/// Dynamics and combinatorics of one parameter.
struct Pipeline {
    param: Parameter,
    alpha: FixedPointInfo<f64>,
    sym: Shared<SymbolicPuzzle>,
    value_source: &'static str,
    escapes: bool,
}

impl Pipeline {
    fn geometry(&self, cfg: &RunConfig) -> Result<Puzzle, Error> {
        let config = PuzzleConfig {
            height: cfg.height,
            ..PuzzleConfig::default()
        };
        Puzzle::new(self.param.clone(), self.alpha.location, self.sym.clone(), config)
    }

    fn summary(&self) -> Value {
        json!({
            "c": complex_json(self.param.c),
            "escapes": self.escapes,
            "alpha": fixed_point_json(&self.alpha),
            "portrait": portrait_json(self.sym.portrait()),
            "value_angle": angle_json(self.sym.value_angle()),
            "value_angle_source": self.value_source,
            "value_orbit": {
                "preperiod": self.sym.orbit_type().0,
                "period": self.sym.orbit_type().1,
            },
            "defined_depth": self.sym.defined_depth(),
        })
    }
}

fn fixed_point_json(fp: &FixedPointInfo<f64>) -> Value {
    json!({
        "location": complex_json(fp.location),
        "multiplier": complex_json(fp.multiplier),
        "multiplier_abs": num(fp.multiplier.norm()),
        "landing_angles": fp.landing_angles.iter().map(angle_json).collect::<Vec<_>>(),
    })
}

fn alpha_of(cfg: &RunConfig, c: Complex64) -> Result<(Parameter, FixedPointInfo<f64>, puzzlekit::Portrait), Error> {
    let param = Parameter::new(cfg.degree, c)?;
    let (fp, portrait) = dynamics::classify_alpha_portrait(&param, cfg.max_period)?;
    Ok((param, fp, portrait))
}

fn pipeline(cfg: &RunConfig, c: Complex64, seed: Option<&Angle>, ctx: &mut Ctx) -> Result<Pipeline, Error> {
    let (param, alpha, portrait) = alpha_of(cfg, c)?;
    let escapes = dynamics::green(&param, c, cfg.orbit_budget, param.escape_radius()) > 0.0;
    let (value, value_source) = match (seed, escapes) {
        (Some(t), true) => {
            match dynamics::value_angle_outside(&param) {
                Ok(v) if v != *t => ctx.warn(Warning::new(
                    "SeedAngleDisagrees",
                    "value angle from the escaping orbit",
                    json!(cfg.orbit_budget),
                    format!("dynamics give {v}, using the supplied {t}"),
                )),
                _ => {}
            }
            (t.clone(), "seed")
        }
        (Some(t), false) => (t.clone(), "seed"),
        (None, true) => (dynamics::value_angle_outside(&param)?, "escaping orbit"),
        (None, false) => {
            return Err(Error::InvalidInput(
                "the critical value does not escape; pass --seed-angle num/den".into(),
            ))
        }
    };
    let sym = Shared::new(SymbolicPuzzle::new(portrait, value)?);
    Ok(Pipeline {
        param,
        alpha,
        sym,
        value_source,
        escapes,
    })
}

fn cmd_portrait(cfg: &RunConfig, ctx: &mut Ctx) -> Result<Done, Error> {
    let c = cfg.validate()?;
    let (param, fp, portrait) = alpha_of(cfg, c)?;
    let beta = dynamics::classify_beta(&param)?;
    let mut fields = vec![
        ("alpha", fixed_point_json(&fp)),
        ("portrait", portrait_json(&portrait)),
        ("beta", beta.as_ref().map(fixed_point_json).unwrap_or(Value::Null)),
    ];
    let mut svg = None;
    if ctx.svg_wanted {
        let mut doc = svg::Svg::new();
        match dynamics::equipotential(&param, cfg.height, 512) {
            Ok(eq) => doc.polyline(&eq, true, "#888888"),
            Err(e) => ctx.warn(Warning::from_error(&e, "equipotential", json!(512))),
        }
        for t in &portrait.angles {
            let opts = RayOptions {
                h_start: cfg.height * 2.0,
                ..RayOptions::default()
            };
            match dynamics::trace_ray_with(&param, t, &opts) {
                Ok(r) => doc.ray(&r.points, &t.to_string()),
                Err(e) => ctx.warn(Warning::from_error(&e, "ray tracing", json!(opts.steps_per_halving))),
            }
        }
        doc.marker(fp.location, "alpha", "#d62728");
        doc.marker(Complex::new(0.0, 0.0), "0", "#000000");
        svg = Some(("portrait.svg".to_string(), doc.render()));
        fields.push(("svg", json!("portrait.svg")));
    }
    Ok(Done {
        fields,
        exit_code: EXIT_OK,
        svg,
    })
}

fn piece_json(p: &puzzlekit::PuzzlePiece) -> Value {
    let (lo, hi) = puzzlekit::geometry::bounding_box(&p.boundary);
    json!({
        "label": label_json(&p.label),
        "contains_critical_point": p.contains_critical_point,
        "vertices": p.boundary.len(),
        "diameter": num(p.diameter()),
        "bbox": [complex_json(lo), complex_json(hi)],
        "sampling_step": num(p.sampling_step),
        "landing_gap": num(p.landing_gap),
        "partial_rays": p.partial_rays,
    })
}

fn cmd_puzzle(cfg: &RunConfig, ctx: &mut Ctx) -> Result<Done, Error> {
    let c = cfg.validate()?;
    let n = cfg.depth.unwrap_or(6);
    let pipe = pipeline(cfg, c, cfg.seed_angle.as_ref(), ctx)?;
    let sym = &pipe.sym;
    sym.check_depth(n)?;
    let comb = Combinatorics::build(sym, n, n)?;
    let pz = pipe.geometry(cfg)?;
    let levels = pz.refine_to_depth(n)?;

    let mut level_json = Vec::new();
    let mut checks = Vec::new();
    let mut mismatch = None;
    for lv in &levels {
        let k = lv.depth;
        let partial: usize = lv.pieces.iter().map(|p| p.partial_rays).sum();
        if partial > 0 {
            ctx.warn(Warning::new(
                "PartialRay",
                &format!("depth-{k} piece boundaries"),
                json!(num(pz.config.ray_floor)),
                format!("{partial} boundary rays stopped on precision loss above the floor potential"),
            ));
        }
        let symbolic_count = comb.levels.get(k).map(|l| l.len());
        level_json.push(json!({
            "depth": k,
            "piece_count": lv.pieces.len(),
            "symbolic_piece_count": symbolic_count,
            "equipotential_height": num(pz.height_at(k)),
            "pieces": lv.pieces.iter().map(|p| piece_json(p)).collect::<Vec<_>>(),
        }));
        let geo_value = pz.locate(c, k);
        let geo_crit = pz.locate(Complex::new(0.0, 0.0), k);
        let value_label = &comb.value_labels[&k];
        let crit_label = &comb.critical_labels[&k];
        let row = json!({
            "depth": k,
            "value_label": label_json(value_label),
            "critical_label": label_json(crit_label),
            "locate_critical_value": located_json(&geo_value, value_label),
            "locate_critical_point": located_json(&geo_crit, crit_label),
        });
        for (geo, sym_label) in [(&geo_value, value_label), (&geo_crit, crit_label)] {
            match geo {
                Ok(l) if l != sym_label => {
                    mismatch.get_or_insert_with(|| format!("depth {k}: located {l}, symbolic {sym_label}"));
                }
                Ok(_) => {}
                Err(e) => ctx.warn(Warning::from_error(e, &format!("point location at depth {k}"), json!(k))),
            }
        }
        checks.push(row);
    }
    let mut fields = vec![
        ("parameter", pipe.summary()),
        ("levels", Value::Array(level_json)),
        ("labels", Value::Array(checks)),
    ];
    let exit_code = if let Some(m) = &mismatch {
        fields.push((
            "error",
            error_json(&Error::LabelMismatch(format!("{m}; the value angle does not match c"))),
        ));
        EXIT_DOMAIN
    } else {
        EXIT_OK
    };
    let mut svg = None;
    if ctx.svg_wanted {
        let mut doc = svg::Svg::new();
        for lv in &levels {
            for p in &lv.pieces {
                doc.piece(&p.boundary, lv.depth, &p.label.to_string());
            }
        }
        doc.marker(c, "c", "#d62728");
        doc.marker(Complex::new(0.0, 0.0), "0", "#000000");
        svg = Some(("puzzle.svg".to_string(), doc.render()));
        fields.push(("svg", json!("puzzle.svg")));
    }
    Ok(Done {
        fields,
        exit_code,
        svg,
    })
}

fn located_json(geo: &Result<Label, Error>, expected: &Label) -> Value {
    match geo {
        Ok(l) => json!({ "label": label_json(l), "agrees": l == expected }),
        Err(e) => json!({ "error": error_json(e) }),
    }
}

fn stop_json(stop: &NestStop) -> Value {
    let kind = match stop {
        NestStop::Complete => "Complete",
        NestStop::NotRecurrent { .. } => "NotRecurrent",
        NestStop::NeverEscapes { .. } => "NeverEscapes",
        NestStop::BudgetExhausted { .. } => "BudgetExhausted",
        NestStop::DepthBudget { .. } => "DepthBudget",
        NestStop::Undefined { .. } => "Undefined",
    };
    json!({ "kind": kind, "description": stop.describe() })
}

fn stop_warning(stop: &NestStop, cfg: &RunConfig, depth_budget: usize) -> Option<Warning> {
    match stop {
        NestStop::BudgetExhausted { operation, budget } => Some(Warning::new(
            "BudgetExhausted",
            operation,
            json!(budget),
            stop.describe(),
        )),
        NestStop::NeverEscapes { .. } => Some(Warning::new(
            "NeverEscapes",
            "favorite child search",
            json!(cfg.orbit_budget),
            stop.describe(),
        )),
        NestStop::DepthBudget { .. } => Some(Warning::new(
            "DepthBudget",
            "favorite nest",
            json!(depth_budget),
            stop.describe(),
        )),
        _ => None,
    }
}

fn nest_json(rec: &puzzlekit::NestRecord) -> Value {
    json!({
        "seed": { "l": rec.seed_l, "q": rec.seed_q },
        "entries": rec.entries.iter().enumerate().map(|(i, e)| json!({
            "level": i,
            "q": label_json(&e.q_label),
            "p": label_json(&e.p_label),
            "q_depth": e.q_depth(),
            "p_depth": e.p_depth(),
            "first_return": e.first_return,
            "k": e.k,
            "l": e.l,
            "favorite_time": e.favorite_time,
        })).collect::<Vec<_>>(),
        "stop": stop_json(&rec.stop),
    })
}

fn profile_json(prof: &puzzlekit::MProfile) -> Value {
    json!({
        "n0": prof.n0,
        "levels": prof.entries.iter().map(|e| json!({
            "level": e.level,
            "q_depth": e.q_label.depth,
            "p_depth": e.p_label.depth,
            "modulus": e.estimate.as_ref().map(|m| num(m.value)),
            "per_grid": e.estimate.as_ref().map(|m| m.per_grid.iter().map(|&v| num(v)).collect::<Vec<_>>()),
            "grid_sizes": e.estimate.as_ref().map(|m| m.grid_sizes.clone()),
            "richardson_error": e.estimate.as_ref().map(|m| num(m.richardson_error)),
            "error": e.error,
        })).collect::<Vec<_>>(),
        "floor": prof.floor.map(num),
        "floor_all": prof.floor_all.map(num),
        "monotone_decreasing": prof.monotone_decreasing,
        "decays_below_tenth": prof.decays_below_tenth,
    })
}

fn profile_warnings(prof: &puzzlekit::MProfile, cfg: &RunConfig, ctx: &mut Ctx) {
    for e in &prof.entries {
        if let Some(err) = &e.error {
            ctx.warn(Warning::new(
                "ModulusFailed",
                &format!("modulus of Q^{} \\ P^{}", e.level, e.level),
                json!(cfg.grid),
                err.clone(),
            ));
        }
    }
}

fn depth_budget(cfg: &RunConfig) -> usize {
    cfg.depth.unwrap_or(nest::DEFAULT_DEPTH_BUDGET)
}

fn cmd_nest(cfg: &RunConfig, levels: usize, moduli: bool, ctx: &mut Ctx) -> Result<Done, Error> {
    let c = cfg.validate()?;
    if levels == 0 {
        return Err(Error::InvalidInput("--levels must be positive".into()));
    }
    let pipe = pipeline(cfg, c, cfg.seed_angle.as_ref(), ctx)?;
    let sym = &pipe.sym;
    let db = depth_budget(cfg);
    let rec = nest::favorite_nest(sym, levels, cfg.orbit_budget, db)?;
    if let Some(w) = stop_warning(&rec.stop, cfg, db) {
        ctx.warn(w);
    }
    let failures = rec.check_invariants(sym, cfg.orbit_budget)?;
    let depths_increase = rec
        .entries
        .iter()
        .flat_map(|e| [e.q_depth(), e.p_depth()])
        .collect::<Vec<_>>()
        .windows(2)
        .all(|w| w[0] < w[1]);
    let holds = failures.is_empty() && depths_increase;
    let mut fields = vec![
        ("parameter", pipe.summary()),
        ("nest", nest_json(&rec)),
        (
            "nesting",
            json!({
                "checked": true,
                "holds": holds,
                "depths_strictly_increase": depths_increase,
                "failures": failures,
            }),
        ),
    ];
    let needs_geometry = moduli || ctx.svg_wanted;
    let pz = if needs_geometry && !rec.entries.is_empty() {
        Some(pipe.geometry(cfg)?)
    } else {
        None
    };
    if let (true, Some(pz)) = (moduli, &pz) {
        let prof = lab::nest_moduli_profile(pz, &rec, 2.min(rec.entries.len() - 1), &cfg.modulus_options());
        profile_warnings(&prof, cfg, ctx);
        fields.push(("moduli_profile", profile_json(&prof)));
    }
    let mut svg = None;
    if let (true, Some(pz)) = (ctx.svg_wanted, &pz) {
        let mut doc = svg::Svg::new();
        for (i, e) in rec.entries.iter().enumerate() {
            for (name, l) in [("Q", &e.q_label), ("P", &e.p_label)] {
                match pz.piece(l) {
                    Ok(p) => doc.piece(&p.boundary, l.depth, &format!("{name}^{i} {l}")),
                    Err(err) => ctx.warn(Warning::from_error(&err, &format!("piece {name}^{i}"), json!(l.depth))),
                }
            }
        }
        doc.marker(c, "c", "#d62728");
        doc.marker(Complex::new(0.0, 0.0), "0", "#000000");
        svg = Some(("nest.svg".to_string(), doc.render()));
        fields.push(("svg", json!("nest.svg")));
    }
    let exit_code = if !holds {
        EXIT_CHECK_FAILED
    } else if matches!(rec.stop, NestStop::BudgetExhausted { .. } | NestStop::NeverEscapes { .. }) {
        EXIT_INCONCLUSIVE
    } else {
        EXIT_OK
    };
    Ok(Done {
        fields,
        exit_code,
        svg,
    })
}

struct CompareArgs {
    c2: Complex64,
    seed2: Option<Angle>,
    levels: usize,
    moduli: bool,
    geometric_depth: usize,
}

/// Deepest `k <= n` such that point location of `c` agrees with the value
/// labels at every depth up to `k`.
fn geometric_agreement(pipe: &Pipeline, cfg: &RunConfig, n: usize, ctx: &mut Ctx) -> Value {
    let pz = match pipe.geometry(cfg) {
        Ok(p) => p,
        Err(e) => return json!({ "error": error_json(&e) }),
    };
    let mut agreed: Option<usize> = None;
    for k in 0..=n {
        let expected = match pipe.sym.value_label(k) {
            Ok(l) => l,
            Err(_) => break,
        };
        match pz.locate(pipe.param.c, k) {
            Ok(l) if l == expected => agreed = Some(k),
            Ok(l) => {
                return json!({
                    "checked_to": n,
                    "agrees_to": agreed,
                    "first_mismatch": { "depth": k, "located": label_json(&l), "symbolic": label_json(&expected) },
                })
            }
            Err(e) => {
                ctx.warn(Warning::from_error(&e, &format!("point location at depth {k}"), json!(k)));
                break;
            }
        }
    }
    json!({ "checked_to": n, "agrees_to": agreed, "first_mismatch": null })
}

fn moduli_floor(pipe: &Pipeline, cfg: &RunConfig, levels: usize, ctx: &mut Ctx) -> Value {
    let db = depth_budget(cfg);
    let rec = match nest::favorite_nest(&pipe.sym, levels, cfg.orbit_budget, db) {
        Ok(r) => r,
        Err(e) => return json!({ "error": error_json(&e) }),
    };
    if let Some(w) = stop_warning(&rec.stop, cfg, db) {
        ctx.warn(w);
    }
    if rec.entries.is_empty() {
        return json!({ "nest": nest_json(&rec), "profile": null });
    }
    let pz = match pipe.geometry(cfg) {
        Ok(p) => p,
        Err(e) => return json!({ "error": error_json(&e) }),
    };
    let prof = lab::nest_moduli_profile(&pz, &rec, 2.min(rec.entries.len() - 1), &cfg.modulus_options());
    profile_warnings(&prof, cfg, ctx);
    json!({ "nest": nest_json(&rec), "profile": profile_json(&prof) })
}

fn cmd_compare(cfg: &RunConfig, args: CompareArgs, ctx: &mut Ctx) -> Result<Done, Error> {
    let c1 = cfg.validate()?;
    let n = cfg.depth.unwrap_or(10);
    let a = pipeline(cfg, c1, cfg.seed_angle.as_ref(), ctx)?;
    let b = pipeline(cfg, args.c2, args.seed2.as_ref(), ctx)?;
    let defined = |p: &Pipeline| p.sym.defined_depth().map_or(n, |h| n.min(h.saturating_sub(1)));
    let n_eff = defined(&a).min(defined(&b));
    if n_eff < n {
        ctx.warn(Warning::new(
            "DepthUnavailable",
            "combinatorics comparison",
            json!(n),
            format!("combinatorics undefined beyond depth {n_eff}"),
        ));
    }
    let full = n_eff.min(6);
    let ca = Combinatorics::build(&a.sym, n_eff, full)?;
    let cb = Combinatorics::build(&b.sym, n_eff, full)?;
    let divergence = ca.first_divergence(&cb, n_eff)?;
    let per_depth: Vec<Value> = (0..=n_eff)
        .map(|k| {
            let full_level = match (ca.levels.get(k), cb.levels.get(k)) {
                (Some(x), Some(y)) => Some(x == y),
                _ => None,
            };
            json!({
                "depth": k,
                "value_a": label_json(&ca.value_labels[&k]),
                "value_b": label_json(&cb.value_labels[&k]),
                "value_agree": ca.value_labels[&k] == cb.value_labels[&k],
                "critical_agree": ca.critical_labels[&k] == cb.critical_labels[&k],
                "level_agree": full_level,
            })
        })
        .collect();
    let agreement_depth: Option<usize> = match divergence {
        None => Some(n_eff),
        Some(0) => None,
        Some(k) => Some(k - 1),
    };
    let gd = args.geometric_depth.min(n_eff);
    let geo_a = geometric_agreement(&a, cfg, gd, ctx);
    let geo_b = geometric_agreement(&b, cfg, gd, ctx);
    let mut fields = vec![
        ("a", json!({ "parameter": a.summary(), "geometric_check": geo_a })),
        ("b", json!({ "parameter": b.summary(), "geometric_check": geo_b })),
        (
            "comparison",
            json!({
                "depth": n_eff,
                "same_portrait": a.sym.portrait() == b.sym.portrait(),
                "same_combinatorics": divergence.is_none(),
                "agreement_depth": agreement_depth,
                "first_divergence": divergence,
                "per_depth": per_depth,
            }),
        ),
    ];
    if args.moduli {
        let fa = moduli_floor(&a, cfg, args.levels, ctx);
        let fb = moduli_floor(&b, cfg, args.levels, ctx);
        fields.push(("moduli_floors", json!({ "a": fa, "b": fb })));
    }
    Ok(Done {
        fields,
        exit_code: EXIT_OK,
        svg: None,
    })
}

fn row_json(r: &lab::VerificationRow) -> Value {
    json!({
        "check": r.check,
        "pieces": r.pieces.iter().map(label_json).collect::<Vec<_>>(),
        "lhs": num(r.lhs),
        "rhs": num(r.rhs),
        "margin": num(r.margin),
        "slack": num(r.slack),
        "passed": r.passed,
        "note": r.note,
    })
}

/// Return times scanned for `m(Q)`: past the piece depth, within the orbit
/// budget.
fn return_horizon(q: &Label, cfg: &RunConfig) -> usize {
    (4 * q.depth + 16).min(cfg.orbit_budget)
}

fn cmd_verify(cfg: &RunConfig, levels: usize, domains: usize, ctx: &mut Ctx) -> Result<Done, Error> {
    let c = cfg.validate()?;
    if levels == 0 {
        return Err(Error::InvalidInput("--levels must be positive".into()));
    }
    let pipe = pipeline(cfg, c, cfg.seed_angle.as_ref(), ctx)?;
    let sym = &pipe.sym;
    let db = depth_budget(cfg);
    let rec = nest::favorite_nest(sym, levels, cfg.orbit_budget, db)?;
    if let Some(w) = stop_warning(&rec.stop, cfg, db) {
        ctx.warn(w);
    }
    let failures = rec.check_invariants(sym, cfg.orbit_budget)?;
    let opts = cfg.modulus_options();
    let mut rows: Vec<lab::VerificationRow> = Vec::new();
    let mut inconclusive = 0usize;
    let mut fields = vec![("parameter", pipe.summary()), ("nest", nest_json(&rec))];
    if !rec.entries.is_empty() {
        let pz = pipe.geometry(cfg)?;
        let prof = lab::nest_moduli_profile(&pz, &rec, 2.min(rec.entries.len() - 1), &opts);
        profile_warnings(&prof, cfg, ctx);
        fields.push(("moduli_profile", profile_json(&prof)));

        let mut record = |r: Result<lab::VerificationRow, Error>, op: String, ctx: &mut Ctx| match r {
            Ok(row) => {
                if row.note.contains("budget exhausted") {
                    ctx.warn(Warning::new(
                        "BudgetExhausted",
                        &format!("{op}: return-domain enumeration"),
                        json!(domains),
                        "m(Q) estimated over a finite set of return domains".into(),
                    ));
                }
                rows.push(row);
            }
            Err(e) => {
                inconclusive += 1;
                ctx.warn(Warning::from_error(&e, &op, json!(domains)));
            }
        };
        for (i, e) in rec.entries.iter().enumerate() {
            let horizon = return_horizon(&e.q_label, cfg);
            let mut children = Vec::new();
            match nest::first_child(sym, &e.q_label, cfg.orbit_budget) {
                Ok(fc) => children.push(("first", fc)),
                Err(err) => ctx.warn(Warning::from_error(&err, "first child", json!(cfg.orbit_budget))),
            }
            if rec.entries.get(i + 1).is_some() {
                match nest::favorite_child(sym, &e.q_label, cfg.orbit_budget) {
                    Ok(fav) => children.push(("favorite", fav)),
                    Err(err) => ctx.warn(Warning::from_error(&err, "favorite child", json!(cfg.orbit_budget))),
                }
            }
            for (which, child) in children {
                let child_horizon = return_horizon(&child.child, cfg);
                let r = match lab::verify_children_lemma(&pz, &child, child_horizon, domains, &opts) {
                    Err(err @ Error::NotRecurrent { .. }) => Ok(lab::VerificationRow::skipped(
                        "children_lemma",
                        vec![child.parent.clone(), child.child.clone()],
                        format!("m({}) is undefined: {err}", child.child),
                    )),
                    r => r,
                };
                record(r, format!("children lemma, {which} child of Q^{i}"), ctx);
            }
            if let Some(frag) = NestFragment::from_nest(&rec, i) {
                let cands = lab::lemma_y_candidates(sym, &frag.q, cfg.orbit_budget)?;
                let mut chosen: Vec<&Label> = cands.iter().filter(|v| **v == frag.q).collect();
                if let Some(v) = cands.iter().find(|v| **v != frag.q) {
                    chosen.push(v);
                }
                for v in chosen {
                    let r = lab::verify_lemma_y(&pz, &frag, v, horizon, domains, &opts);
                    record(r, format!("lemma Y at level {i} with V of depth {}", v.depth), ctx);
                }
            }
        }
    }
    let failed = rows.iter().filter(|r| r.passed == Some(false)).count();
    let passed = rows.iter().filter(|r| r.passed == Some(true)).count();
    let skipped = rows.iter().filter(|r| r.passed.is_none()).count();
    fields.push(("rows", Value::Array(rows.iter().map(row_json).collect())));
    fields.push((
        "nesting",
        json!({ "checked": true, "holds": failures.is_empty(), "failures": failures }),
    ));
    fields.push((
        "summary",
        json!({ "passed": passed, "failed": failed, "skipped": skipped, "inconclusive": inconclusive }),
    ));
    let exit_code = if failed > 0 || !failures.is_empty() {
        EXIT_CHECK_FAILED
    } else if passed == 0 && (inconclusive > 0 || rec.stop != NestStop::Complete) {
        EXIT_INCONCLUSIVE
    } else {
        EXIT_OK
    };
    Ok(Done {
        fields,
        exit_code,
        svg: None,
    })
}
