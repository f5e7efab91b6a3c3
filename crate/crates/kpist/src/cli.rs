//! Command-line front end. `run` parses arguments, executes one command and
//! returns the process exit code.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::config::{parse_times, RunConfig};
use crate::error::{Error, Result};
use crate::heatjost::smallness_report;
use crate::inverse::{reconstruct_u, solve_inverse};
use crate::io::{encode_metrics, load_spectral, save_field, save_spectral, save_traces, Encoding};
use crate::kpsolver::{compare, ist_solve, pde_solve, IstOptions, PdeConfig, RunManifest};
use crate::spectral::{decay_report, evolve, forward_transform, ContourGrid, DecayReport};
use crate::validation::{Suite, CRITERIA};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_CONVERGENCE: i32 = 3;
pub const EXIT_VALIDATION: i32 = 4;

#[derive(Parser, Debug)]
#[command(
    name = "kpist",
    version,
    about = "Inverse spectral transform solver for KP-II on a cylinder"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    common: Common,
}

#[derive(Args, Debug, Clone)]
struct Common {
    /// Run configuration (key:value with [sections]); defaults to the reference configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Comma-separated evaluation times.
    #[arg(long, global = true)]
    times: Option<String>,
    /// Fixed-point tolerance for both the Jost and the inverse iterations.
    #[arg(long, global = true)]
    tol: Option<f64>,
    #[arg(long = "max-iter", global = true)]
    max_iter: Option<usize>,
    #[arg(long = "n-max", global = true)]
    n_max: Option<usize>,
    /// Caps the worker threads of the parallel stages.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Compare against the split-step solver.
    #[arg(long, global = true)]
    oracle: bool,
    /// Run outside the smallness region.
    #[arg(long, global = true)]
    force: bool,
    /// Encoding of written Field files.
    #[arg(long, global = true, value_enum, default_value_t = FieldEncoding::Binary)]
    encoding: FieldEncoding,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum FieldEncoding {
    Csv,
    Binary,
}

impl From<FieldEncoding> for Encoding {
    fn from(e: FieldEncoding) -> Self {
        match e {
            FieldEncoding::Csv => Encoding::Csv,
            FieldEncoding::Binary => Encoding::Binary,
        }
    }
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Potential -> spectral data and decay report.
    Forward,
    /// Spectral data -> spectral data at each time.
    Evolve {
        #[arg(long)]
        input: PathBuf,
    },
    /// Spectral data -> potential and boundary traces.
    Inverse {
        #[arg(long)]
        input: PathBuf,
    },
    /// Split-step solution at each time.
    Pde,
    /// Full transform pipeline at each time.
    Solve,
    /// Acceptance suite; writes a pass/fail table.
    Validate {
        /// Comma-separated criterion ids; all when omitted.
        #[arg(long)]
        criteria: Option<String>,
        #[arg(long, default_value_t = 20240601)]
        seed: u64,
    },
}

fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Convergence { .. } | Error::Divergence { .. } => EXIT_CONVERGENCE,
        Error::Validation(_) => EXIT_VALIDATION,
        _ => EXIT_CONFIG,
    }
}

fn resolve_config(c: &Common) -> Result<RunConfig> {
    let mut cfg = match &c.config {
        Some(p) => RunConfig::parse(&fs::read_to_string(p)?)?,
        None => RunConfig::default(),
    };
    if let Some(t) = &c.times {
        cfg.times = parse_times(t)?;
    }
    if let Some(t) = c.tol {
        cfg.jost.tol = t;
        cfg.inverse.tol = t;
    }
    if let Some(m) = c.max_iter {
        cfg.jost.max_iter = m;
        cfg.inverse.max_iter = m;
    }
    if let Some(n) = c.n_max {
        cfg.n_max = n;
    }
    if c.out.is_some() {
        cfg.out.clone_from(&c.out);
    }
    if c.threads.is_some() {
        cfg.threads = c.threads;
    }
    cfg.force |= c.force;
    cfg.oracle |= c.oracle;
    cfg.validate()?;
    Ok(cfg)
}

fn out_dir(cfg: &RunConfig) -> PathBuf {
    cfg.out
        .clone()
        .unwrap_or_else(|| PathBuf::from("kpist-out"))
}

fn time_tag(t: f64) -> String {
    format!("t{t}")
}

fn decay_text(r: &DecayReport) -> String {
    let list = |v: &[f64]| {
        v.iter()
            .map(|x| x.to_string())
            .collect::<Vec<_>>()
            .join(", ")
    };
    format!(
        "sup_bound: {}\nl2_bound: {}\nlambda_norm: {}\ngamma_c: {}\nforward_margin: {}\nwzeta2: {}\ntail_estimate: {}\n",
        list(&r.sup_bound),
        list(&r.l2_bound),
        r.lambda_norm,
        r.gamma_c,
        r.forward_margin,
        r.wzeta2,
        r.tail_estimate
    )
}

struct Ctx {
    cfg: RunConfig,
    out: PathBuf,
    enc: Encoding,
    manifest: RunManifest,
}

impl Ctx {
    fn record(&mut self, path: &Path) {
        let name = path
            .strip_prefix(&self.out)
            .unwrap_or(path)
            .display()
            .to_string();
        self.manifest.outputs.push(name);
    }

    fn write_field(&mut self, name: &str, f: &crate::cylinder::Field) -> Result<()> {
        let p = self.out.join(name);
        save_field(&p, f, self.enc)?;
        self.record(&p);
        Ok(())
    }

    fn write_text(&mut self, name: &str, text: &str) -> Result<()> {
        let p = self.out.join(name);
        fs::write(&p, text)?;
        self.record(&p);
        Ok(())
    }

    fn preflight(&self, u: &crate::cylinder::Field) -> Result<()> {
        let s = smallness_report(u)?;
        if !s.ok && !self.cfg.force {
            return Err(Error::Domain(format!(
                "smallness ratio {:.4} >= 1 is outside the theory; pass --force to run anyway",
                s.ratio
            )));
        }
        Ok(())
    }
}

fn forward(ctx: &mut Ctx) -> Result<i32> {
    let g = ctx.cfg.grid()?;
    let u = ctx.cfg.potential.sample(g)?;
    ctx.preflight(&u)?;
    let cg = ContourGrid::new(g, ctx.cfg.n_max)?;
    let f = forward_transform(&u, &cg, ctx.cfg.method, &ctx.cfg.jost)?;
    let p = ctx.out.join("spectral.csv");
    save_spectral(&p, &f)?;
    ctx.record(&p);
    ctx.write_text("decay.txt", &decay_text(&decay_report(&f)))?;
    Ok(EXIT_OK)
}

fn evolve_cmd(ctx: &mut Ctx, input: &Path) -> Result<i32> {
    let f = load_spectral(input)?;
    for &t in &ctx.cfg.times.clone() {
        let ft = evolve(&f, t)?;
        let p = ctx.out.join(format!("spectral_{}.csv", time_tag(ft.time)));
        save_spectral(&p, &ft)?;
        ctx.record(&p);
    }
    Ok(EXIT_OK)
}

fn inverse_cmd(ctx: &mut Ctx, input: &Path) -> Result<i32> {
    let f = load_spectral(input)?;
    let g = *f.contour.grid();
    ctx.cfg.ell = g.ell();
    ctx.cfg.nx = g.nx();
    ctx.cfg.ny = g.ny();
    ctx.cfg.ly = g.ly();
    ctx.cfg.n_max = f.contour.n_max();
    ctx.manifest.config = ctx.cfg.clone();
    if decay_report(&f).forward_margin >= 1.0 && !ctx.cfg.force {
        return Err(Error::Domain(
            "spectral data outside the contraction region; pass --force".into(),
        ));
    }
    let w = solve_inverse(&f, &ctx.cfg.inverse)?;
    let r = reconstruct_u(&f, &w, &ctx.cfg.inverse)?;
    ctx.write_field("u.field", &r.u)?;
    let dir = ctx.out.join("traces");
    save_traces(&dir, &w)?;
    ctx.record(&dir);
    ctx.write_text(
        "inverse.txt",
        &format!(
            "iterations: {}\nresidual: {}\nimag_ratio: {}\ntail_budget: {}\n",
            w.iterations, w.residual, r.imag_ratio, r.tail_budget
        ),
    )?;
    Ok(EXIT_OK)
}

fn pde_runs(ctx: &Ctx, u: &crate::cylinder::Field) -> Result<Vec<crate::cylinder::Field>> {
    ctx.cfg
        .times
        .iter()
        .map(|&t| {
            Ok(pde_solve(
                u,
                &PdeConfig {
                    dt: ctx.cfg.pde_dt,
                    t_end: t,
                    dealias: ctx.cfg.dealias,
                },
            )?
            .u)
        })
        .collect()
}

fn pde_cmd(ctx: &mut Ctx) -> Result<i32> {
    let u = ctx.cfg.potential.sample(ctx.cfg.grid()?)?;
    for (t, f) in ctx.cfg.times.clone().into_iter().zip(pde_runs(ctx, &u)?) {
        ctx.write_field(&format!("pde_{}.field", time_tag(t)), &f)?;
    }
    Ok(EXIT_OK)
}

fn solve_cmd(ctx: &mut Ctx) -> Result<i32> {
    let u = ctx.cfg.potential.sample(ctx.cfg.grid()?)?;
    ctx.preflight(&u)?;
    let opts = IstOptions {
        n_max: ctx.cfg.n_max,
        method: ctx.cfg.method,
        jost: ctx.cfg.jost,
        inverse: ctx.cfg.inverse,
        force: ctx.cfg.force,
    };
    let run = ist_solve(&u, &ctx.cfg.times, &opts)?;
    let oracle = if ctx.cfg.oracle {
        Some(pde_runs(ctx, &u)?)
    } else {
        None
    };
    let mut rows = Vec::new();
    for (i, fr) in run.frames.iter().enumerate() {
        ctx.write_field(&format!("ist_{}.field", time_tag(fr.t)), &fr.u)?;
        let reference = match &oracle {
            Some(p) => Some(&p[i]),
            None if fr.t == 0.0 => Some(&u),
            None => None,
        };
        if let Some(r) = reference {
            let c = compare(&fr.u, r)?;
            rows.push((fr.t, c.l2_rel, c.linf_rel));
        }
    }
    let p = ctx.out.join("spectral.csv");
    save_spectral(&p, &run.initial)?;
    ctx.record(&p);
    ctx.write_text("metrics.csv", &encode_metrics(&rows))?;
    Ok(EXIT_OK)
}

fn validate_cmd(ctx: &mut Ctx, criteria: Option<&str>, seed: u64) -> Result<i32> {
    let ids: Vec<u8> = match criteria {
        None => CRITERIA.iter().map(|c| c.0).collect(),
        Some(s) => s
            .split(',')
            .map(|p| {
                let id: u8 = p
                    .trim()
                    .parse()
                    .map_err(|_| Error::Config(format!("bad criterion id {p:?}")))?;
                if CRITERIA.iter().any(|c| c.0 == id) {
                    Ok(id)
                } else {
                    Err(Error::Config(format!("no criterion {id}")))
                }
            })
            .collect::<Result<_>>()?,
    };
    ctx.manifest.seed = Some(seed);
    let mut suite = Suite::new(&ctx.cfg, seed)?;
    let results = suite.run_all(&ids, |r| println!("{r}"));
    let mut table = String::from("id,criterion,result,detail\n");
    for r in &results {
        let detail = r.detail.replace('"', "'");
        table.push_str(&format!(
            "{},{},{},\"{detail}\"\n",
            r.id,
            r.name,
            if r.passed { "pass" } else { "fail" }
        ));
    }
    ctx.write_text("validation.csv", &table)?;
    Ok(if results.iter().all(|r| r.passed) {
        EXIT_OK
    } else {
        EXIT_VALIDATION
    })
}

fn execute(cli: Cli) -> i32 {
    let cfg = match resolve_config(&cli.common) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("kpist: {e}");
            return EXIT_CONFIG;
        }
    };
    let out = out_dir(&cfg);
    if let Err(e) = fs::create_dir_all(&out) {
        eprintln!("kpist: cannot create {}: {e}", out.display());
        return EXIT_CONFIG;
    }
    let name = match &cli.command {
        Command::Forward => "forward",
        Command::Evolve { .. } => "evolve",
        Command::Inverse { .. } => "inverse",
        Command::Pde => "pde",
        Command::Solve => "solve",
        Command::Validate { .. } => "validate",
    };
    let mut ctx = Ctx {
        manifest: RunManifest::new(name, cfg.clone()),
        cfg,
        out,
        enc: cli.common.encoding.into(),
    };
    let body = |ctx: &mut Ctx| match &cli.command {
        Command::Forward => forward(ctx),
        Command::Evolve { input } => evolve_cmd(ctx, input),
        Command::Inverse { input } => inverse_cmd(ctx, input),
        Command::Pde => pde_cmd(ctx),
        Command::Solve => solve_cmd(ctx),
        Command::Validate { criteria, seed } => validate_cmd(ctx, criteria.as_deref(), *seed),
    };
    let result = match ctx.cfg.threads {
        Some(n) => match rayon::ThreadPoolBuilder::new().num_threads(n).build() {
            Ok(pool) => pool.install(|| body(&mut ctx)),
            Err(e) => Err(Error::Config(format!("cannot build thread pool: {e}"))),
        },
        None => body(&mut ctx),
    };
    let code = match &result {
        Ok(c) => *c,
        Err(e) => {
            eprintln!("kpist {name}: {e}");
            ctx.manifest.partial = true;
            exit_code(e)
        }
    };
    if let Err(e) = fs::write(ctx.out.join("manifest.txt"), ctx.manifest.to_text()) {
        eprintln!("kpist: cannot write manifest: {e}");
        return code.max(EXIT_CONFIG);
    }
    code
}

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    match Cli::try_parse_from(args) {
        Ok(cli) => execute(cli),
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
            let _ = e.print();
            code
        }
    }
}
