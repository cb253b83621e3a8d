//! Command-line front end: configure charts and fields, run verification
//! suites, compute norms/distances/flows, and emit JSON/CSV reports.

use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Parser, Subcommand};

use reebflow_core::charts::ContactChart;
use reebflow_core::config::RunConfig;
use reebflow_core::error::Error;
use reebflow_core::flows::Isotopy;
use reebflow_core::lab;
use reebflow_core::metrics::{self, MetricParams};
use reebflow_core::prequant::PrequantBundle;
use reebflow_core::report::{reports_to_csv, reports_to_json, VerificationReport};
use reebflow_core::sampling;
use reebflow_core::suites::{run_suite, SuiteConfig, SUITE_NAMES};

#[derive(Parser)]
#[command(
    name = "reebflow",
    version,
    about = "Numerical toolkit for contact Hamiltonian dynamics: flows, norms, distances and verification suites"
)]
struct Cli {
    /// TOML config file (chart, fields, resolutions).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory for JSON/CSV reports.
    #[arg(long, global = true, default_value = "reebflow-out")]
    out: PathBuf,
    /// Built-in chart: cylinder | cylinder_periodic_z | hopf.
    #[arg(long, global = true)]
    chart: Option<String>,
    /// RNG seed recorded in reports.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Integrator step.
    #[arg(long, global = true)]
    step: Option<f64>,
    /// Uniform grid resolution per coordinate.
    #[arg(long, global = true)]
    res: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a verification suite: calculus | flows | metrics | prequant | lab | all.
    Verify {
        suite: String,
        /// Reduced sample counts (same thresholds) for smoke runs.
        #[arg(long)]
        quick: bool,
    },
    /// Contact norm of a field at a fixed time.
    Norm {
        #[arg(long)]
        field: String,
        #[arg(long, default_value_t = 0.0)]
        t: f64,
    },
    /// Integrate the flow of a field and summarize the time-t map.
    Flow {
        #[arg(long)]
        field: String,
        #[arg(long, default_value_t = 1.0)]
        t: f64,
        #[arg(long, default_value_t = 64)]
        samples: usize,
    },
    /// Contact distances between the flows of two fields.
    Distance {
        #[arg(long)]
        field_a: String,
        #[arg(long)]
        field_b: String,
    },
    /// Project a basic function on the Hopf chart to the base sphere.
    Project {
        #[arg(long)]
        field: String,
    },
    /// Cauchy study of the singular-profile approximants.
    Rho {
        #[arg(long, default_value_t = 0.1)]
        eps: f64,
        /// Comma-separated approximant indices, e.g. 4,8,16,32.
        #[arg(long, default_value = "4,8,16,32")]
        n: String,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(all_passed) => {
            if all_passed {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            }
        }
        Err(err) => {
            eprintln!("error: {err}");
            let code = match err.downcast_ref::<Error>() {
                Some(Error::Config(_)) | Some(Error::Expr(_)) | Some(Error::Domain(_)) => 2,
                Some(_) => 1,
                // Non-library errors (unreadable config paths etc.) are
                // usage-level.
                None => 2,
            };
            ExitCode::from(code)
        }
    }
}

struct Context {
    config: RunConfig,
    out_dir: PathBuf,
}

impl Context {
    fn chart(&self) -> anyhow::Result<Arc<ContactChart>> {
        Ok(self.config.build_chart()?)
    }

    fn params(&self) -> MetricParams {
        self.config.metric_params()
    }

    fn write_reports(&self, name: &str, reports: &[VerificationReport]) -> anyhow::Result<()> {
        std::fs::create_dir_all(&self.out_dir)?;
        std::fs::write(
            self.out_dir.join(format!("{name}.json")),
            reports_to_json(reports),
        )?;
        std::fs::write(
            self.out_dir.join(format!("{name}.csv")),
            reports_to_csv(reports),
        )?;
        Ok(())
    }

    fn write_table(&self, name: &str, header: &str, rows: &[String]) -> anyhow::Result<()> {
        std::fs::create_dir_all(&self.out_dir)?;
        let mut text = String::from(header);
        for row in rows {
            text.push('\n');
            text.push_str(row);
        }
        text.push('\n');
        std::fs::write(self.out_dir.join(format!("{name}.csv")), text)?;
        Ok(())
    }
}

fn effective_config(cli: &Cli) -> anyhow::Result<RunConfig> {
    let mut config = match &cli.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
            RunConfig::from_toml(&text)?
        }
        None => RunConfig::from_toml(
            r#"
[chart]
builtin = "cylinder"
r_min = 0.005
r_max = 1.0
"#,
        )?,
    };
    if let Some(chart) = &cli.chart {
        config.chart.builtin = Some(chart.clone());
        config.chart.coords = None;
        config.chart.alpha = None;
    }
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }
    if let Some(step) = cli.step {
        config.step = step;
    }
    if let Some(res) = cli.res {
        config.resolution.quad = res;
        config.resolution.osc = res;
    }
    config.validate()?;
    Ok(config)
}

fn run(cli: &Cli) -> anyhow::Result<bool> {
    let config = effective_config(cli)?;
    let ctx = Context {
        out_dir: config
            .out_dir
            .clone()
            .map(PathBuf::from)
            .unwrap_or_else(|| cli.out.clone()),
        config,
    };
    match &cli.command {
        Command::Verify { suite, quick } => cmd_verify(&ctx, suite, *quick),
        Command::Norm { field, t } => cmd_norm(&ctx, field, *t),
        Command::Flow { field, t, samples } => cmd_flow(&ctx, field, *t, *samples),
        Command::Distance { field_a, field_b } => cmd_distance(&ctx, field_a, field_b),
        Command::Project { field } => cmd_project(&ctx, field),
        Command::Rho { eps, n } => cmd_rho(&ctx, *eps, n),
    }
}

fn cmd_verify(ctx: &Context, suite: &str, quick: bool) -> anyhow::Result<bool> {
    if !SUITE_NAMES.contains(&suite) {
        return Err(Error::Config(format!(
            "unknown suite `{suite}` (expected one of {SUITE_NAMES:?})"
        ))
        .into());
    }
    let mut cfg = SuiteConfig {
        seed: ctx.config.seed,
        step: ctx.config.step,
        ..Default::default()
    };
    if quick {
        cfg = cfg.quick();
    }
    let started = std::time::Instant::now();
    let reports = run_suite(suite, &cfg)?;
    let elapsed = started.elapsed().as_secs_f64();
    let failed: Vec<&VerificationReport> = reports.iter().filter(|r| !r.pass).collect();
    for r in &reports {
        println!(
            "{} {:<58} value {:>12.4e}  tol {:>8.1e}  [{}]",
            if r.pass { "PASS" } else { "FAIL" },
            r.check,
            r.value,
            r.tolerance,
            r.resolution
        );
    }
    println!(
        "suite {suite}: {}/{} checks passed in {elapsed:.1} s",
        reports.len() - failed.len(),
        reports.len()
    );
    ctx.write_reports(&format!("verify-{suite}"), &reports)?;
    Ok(failed.is_empty())
}

fn cmd_norm(ctx: &Context, field: &str, t: f64) -> anyhow::Result<bool> {
    let chart = ctx.chart()?;
    let f = ctx.config.build_field(field)?;
    let params = ctx.params();
    let report = metrics::contact_norm(&chart, &f, t, &params);
    println!(
        "contact norm of `{field}` on {} at t={t}: osc {:.6} + |c| {:.6} = {:.6}",
        chart.name,
        report.osc_part,
        report.c_part.abs(),
        report.total
    );
    let v = VerificationReport::residual(
        format!("norm.{field}"),
        report.total,
        f64::INFINITY,
        format!("{:?}", report.grid_resolution),
    )
    .with_seed(ctx.config.seed);
    ctx.write_reports("norm", &[v])?;
    Ok(true)
}

fn cmd_flow(ctx: &Context, field: &str, t: f64, samples: usize) -> anyhow::Result<bool> {
    let chart = ctx.chart()?;
    let f = ctx.config.build_field(field)?;
    let phi = Isotopy::new(chart.clone(), f, ctx.config.step);
    let seeds = sampling::halton_box(&chart.domain, samples, 0.05);
    let mut rows = Vec::with_capacity(samples);
    let mut max_disp: f64 = 0.0;
    for seed in &seeds {
        let y = phi.point(seed, t)?;
        max_disp = max_disp.max(chart.d0(seed, &y));
        rows.push(
            seed.iter()
                .chain(y.iter())
                .map(|v| format!("{v:.12e}"))
                .collect::<Vec<_>>()
                .join(","),
        );
    }
    println!(
        "flow of `{field}` at t={t}: max displacement {max_disp:.6e} over {samples} seeds (step {:.1e})",
        ctx.config.step
    );
    ctx.write_table("flow", "x1,x2,x3,y1,y2,y3", &rows)?;
    Ok(true)
}

fn cmd_distance(ctx: &Context, field_a: &str, field_b: &str) -> anyhow::Result<bool> {
    let chart = ctx.chart()?;
    let fa = ctx.config.build_field(field_a)?;
    let fb = ctx.config.build_field(field_b)?;
    let phi = Isotopy::new(chart.clone(), fa, ctx.config.step);
    let psi = Isotopy::new(chart.clone(), fb, ctx.config.step);
    let params = ctx.params();
    let d = metrics::contact_distances(&phi, &psi, &params)?;
    println!(
        "d_cont(`{field_a}`, `{field_b}`) = {:.6e} (c0 {:.6e} + D {:.6e}); d_cont_inf = {:.6e}",
        d.d_cont, d.c0_sup, d.d_l1, d.d_cont_inf
    );
    let rows = vec![
        format!("c0_sup,{:.12e}", d.c0_sup),
        format!("d_l1,{:.12e}", d.d_l1),
        format!("d_linf,{:.12e}", d.d_linf),
        format!("d_cont,{:.12e}", d.d_cont),
        format!("d_cont_inf,{:.12e}", d.d_cont_inf),
    ];
    ctx.write_table("distance", "quantity,value", &rows)?;
    Ok(true)
}

fn cmd_project(ctx: &Context, field: &str) -> anyhow::Result<bool> {
    let bundle = PrequantBundle::hopf();
    // Field expressions for the projection always live on the Hopf chart.
    let hopf_cfg = RunConfig::from_toml(
        r#"
[chart]
builtin = "hopf"
"#,
    )?;
    let src = ctx
        .config
        .fields
        .get(field)
        .map(String::as_str)
        .unwrap_or(field);
    let h = hopf_cfg.build_field(src)?;
    let projected = bundle.project_function(&h)?;
    let res = [64usize, 64];
    let mean = bundle.base.integrate(&projected.field, 0.0, &res) / bundle.base.area(&res);
    let pts = bundle.base.osc_points(&[64, 64]);
    let vals: Vec<f64> = pts.iter().map(|b| projected.field.value(b, 0.0)).collect();
    let (lo, hi) = vals
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
            (lo.min(v), hi.max(v))
        });
    println!("projected `{field}` to the base: range [{lo:.6}, {hi:.6}], omega-mean {mean:.6}");
    let rows = vec![
        format!("min,{lo:.12e}"),
        format!("max,{hi:.12e}"),
        format!("mean,{mean:.12e}"),
    ];
    ctx.write_table("project", "quantity,value", &rows)?;
    Ok(true)
}

fn cmd_rho(ctx: &Context, eps: f64, n_list: &str) -> anyhow::Result<bool> {
    let ns: Vec<usize> = n_list
        .split(',')
        .map(|s| {
            s.trim()
                .parse::<usize>()
                .map_err(|_| Error::Config(format!("bad approximant index `{s}`")))
        })
        .collect::<Result<_, _>>()?;
    let profile = lab::RhoProfile::new(eps)?;
    let params = MetricParams {
        quad_res: metrics::ResSpec::PerCoord(vec![96, 6, 4]),
        osc_res: metrics::ResSpec::PerCoord(vec![192, 4, 4]),
        time_segments: 4,
        sup_samples: 200,
        sup_margin: 0.0,
        normalize_volume: false,
    };
    let exp = lab::rho_cauchy_study(&profile, &ns, 1e-2, &params)?;
    let verdict = exp.cauchy_pass && exp.envelope_pass && exp.probe_divergence_pass;
    println!(
        "rho study (eps={eps}, n={ns:?}): tails {:?} -> {}",
        exp.tails,
        if verdict { "PASS" } else { "FAIL" }
    );
    let mut rows = Vec::new();
    for (i, label) in exp.labels.iter().enumerate() {
        rows.push(format!(
            "{label},{}",
            exp.distances[i]
                .iter()
                .map(|d| format!("{d:.12e}"))
                .collect::<Vec<_>>()
                .join(",")
        ));
    }
    ctx.write_table(
        "rho-distances",
        &format!("flow,{}", exp.labels.join(",")),
        &rows,
    )?;
    let probe_rows: Vec<String> = exp
        .probe
        .iter()
        .map(|(r, twist, zdrift)| format!("{r:.12e},{twist:.12e},{zdrift:.12e}"))
        .collect();
    ctx.write_table("rho-probe", "r,theta_twist,z_drift", &probe_rows)?;
    std::fs::create_dir_all(&ctx.out_dir)?;
    std::fs::write(
        ctx.out_dir.join("rho.json"),
        serde_json::to_string_pretty(&exp)?,
    )?;
    Ok(verdict)
}
