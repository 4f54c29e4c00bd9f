use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::json;

use wasserflow::counterexample::{
    demonstrate_nonuniqueness, sample_pairs, shrinking_pairs, verify_l1_lipschitz, verify_wp_blowup, NuFamily,
};
use wasserflow::harness::{
    apriori_bound, audit_bounds, bound_rows, load_config, read_trajectory, run_convergence_study, write_csv,
    write_frames, write_trajectory, FileLog, Manifest, RunConfig,
};
use wasserflow::measure::io::read_measure;
use wasserflow::measure::{to_quadrature, Measure, MultiScaleMeasure, PopulationVector};
use wasserflow::schemes::{run_multi_population, run_multiscale, run_scheme};
use wasserflow::transport::{trajectory_distance_detailed, wasserstein_atoms, wasserstein_measures};
use wasserflow::velocity::f1_discontinuity_demo;
use wasserflow::{Error, Result};

#[derive(Parser)]
#[command(name = "wasserflow", version, about = "Push-forward schemes for transport with measure-dependent velocity")]
struct Cli {
    /// Run configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Seed for randomized checks; overrides the configuration.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads; 0 uses every core.
    #[arg(long, global = true, default_value_t = 0)]
    threads: usize,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the configured scheme and write every recorded frame.
    Simulate,
    /// Run the configured refinement ladder against a fine reference.
    Converge,
    /// Compare measured distances with the a-priori bounds.
    Bounds(BoundsArgs),
    /// Wasserstein distance between two measure files.
    Ot(OtArgs),
    /// Reproduce the L1-Lipschitz non-uniqueness example.
    Counterexample(CounterexampleArgs),
    /// Demonstrations.
    #[command(subcommand)]
    Demo(Demo),
}

#[derive(Args)]
struct BoundsArgs {
    /// Directory holding a trajectory written by `simulate`.
    #[arg(long, requires = "against")]
    measure: Option<PathBuf>,
    /// Directory holding the trajectory treated as the exact solution.
    #[arg(long, requires = "measure")]
    against: Option<PathBuf>,
}

#[derive(Args)]
struct OtArgs {
    a: PathBuf,
    b: PathBuf,
    #[arg(long, default_value_t = 1.0)]
    p: f64,
    #[arg(long, default_value_t = 2)]
    quadrature: usize,
    /// Write the optimal plan between the quadrature atoms (rows: i, j, mass).
    #[arg(long)]
    plan: Option<PathBuf>,
}

#[derive(Args)]
struct CounterexampleArgs {
    #[arg(long, default_value_t = 20)]
    truncation: usize,
    #[arg(long, default_value_t = 100)]
    pairs: usize,
    #[arg(long, default_value_t = 0.01)]
    dt: f64,
    #[arg(long, default_value_t = 1.0)]
    p: f64,
    #[arg(long, default_value_t = 2)]
    quadrature: usize,
}

#[derive(Subcommand)]
enum Demo {
    /// Discontinuity of the velocity at the origin when f = 1.
    #[command(name = "f1-discontinuity")]
    F1Discontinuity {
        #[arg(long, default_value_t = 0.5)]
        r: f64,
        #[arg(long, default_value_t = 0.1)]
        eps: f64,
        #[arg(long, default_value_t = 1.0)]
        radius: f64,
        #[arg(long, default_value_t = 1.0)]
        p: f64,
        #[arg(long, default_value_t = 40)]
        resolution: usize,
    },
}

fn need_config(cli: &Cli) -> Result<RunConfig> {
    let path = cli
        .config
        .as_ref()
        .ok_or_else(|| Error::Config("this command needs --config".into()))?;
    let mut cfg = load_config(path)?;
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    Ok(cfg)
}

fn manifest(cli: &Cli, command: &str, cfg: Option<&RunConfig>) -> Manifest {
    let mut m = Manifest::new(command);
    if let Some(p) = &cli.config {
        m.inputs.push(p.display().to_string());
    }
    m.seed = cfg.map(|c| c.seed).or(cli.seed);
    m
}

fn simulate(cli: &Cli) -> Result<()> {
    let cfg = need_config(cli)?;
    let mut log = FileLog::new(&cli.out)?;
    let mut summary = serde_json::Map::new();
    summary.insert("name".into(), json!(cfg.name));
    summary.insert("scheme".into(), json!(cfg.kind.name()));
    if !cfg.populations.is_empty() {
        let dim = cfg.dim();
        let grid = cfg.scheme.grid(dim)?;
        let pops = cfg
            .populations
            .iter()
            .map(|p| Ok(Measure::Grid(p.initial.to_initial_data().discretize(&grid)?)))
            .collect::<Result<Vec<_>>>()?;
        let trajs = run_multi_population(&PopulationVector::new(pops)?, &cfg.multi_population(), cfg.kind)?;
        for (i, t) in trajs.iter().enumerate() {
            write_trajectory(&mut log, &format!("pop{i}_"), t)?;
        }
        summary.insert("populations".into(), json!(trajs.len()));
        summary.insert("frames".into(), json!(trajs[0].len()));
    } else if let Some(msm) = cfg.multiscale_model() {
        let (init, _) = cfg.single()?;
        let ac = Measure::Grid(init.discretize(&cfg.scheme.grid(init.dim())?)?);
        let atoms = cfg.atoms.as_ref().expect("checked by multiscale_model").atoms.clone();
        let traj = run_multiscale(&MultiScaleMeasure::new(ac, atoms)?, &msm, &cfg.scheme, cfg.kind)?;
        write_frames(&mut log, "ac_", traj.frames().iter().map(|(_, m)| &m.ac))?;
        let atoms: Vec<Measure> = traj.frames().iter().map(|(_, m)| Measure::Atoms(m.singular.clone())).collect();
        write_frames(&mut log, "atoms_", atoms.iter())?;
        #[derive(Serialize)]
        struct Row {
            frame: usize,
            time: f64,
            ac_mass: f64,
            atom_count: usize,
            atom_mass: f64,
        }
        let rows: Vec<Row> = traj
            .frames()
            .iter()
            .enumerate()
            .map(|(k, (t, m))| Row {
                frame: k,
                time: *t,
                ac_mass: m.ac.total_mass(),
                atom_count: m.singular.len(),
                atom_mass: m.singular.total_mass(),
            })
            .collect();
        write_csv(&log.path("trajectory.csv"), &rows)?;
        summary.insert("frames".into(), json!(traj.len()));
    } else {
        let (init, model) = cfg.single()?;
        let mu0 = Measure::Grid(init.discretize(&cfg.scheme.grid(init.dim())?)?);
        let traj = run_scheme(cfg.kind, &mu0, model, &cfg.scheme)?;
        write_trajectory(&mut log, "", &traj)?;
        summary.insert("frames".into(), json!(traj.len()));
    }
    let mut m = manifest(cli, "simulate", Some(&cfg));
    m.summary = serde_json::Value::Object(summary);
    let path = m.write(&mut log)?;
    println!("wrote {} files to {}", log.files().len(), cli.out.display());
    println!("manifest {}", path.display());
    Ok(())
}

fn converge(cli: &Cli) -> Result<()> {
    let cfg = need_config(cli)?;
    let study = run_convergence_study(&cfg)?;
    let mut log = FileLog::new(&cli.out)?;
    write_csv(&log.path("convergence.csv"), &study.levels)?;
    if let Some(f) = &study.fit {
        write_csv(&log.path("fit.csv"), &[f])?;
    }
    for l in &study.levels {
        println!(
            "dx {:<10} dt {:<10} error {:.6e} halo {:.3e} bound {:.3e} hypotheses {}",
            l.dx, l.dt, l.error, l.halo, l.bound, l.hypothesis_ok
        );
    }
    match &study.fit {
        Some(f) => println!("order {:.4} r2 {:.4}", f.order, f.r2),
        None => println!("order undefined (some error is zero)"),
    }
    let mut m = manifest(cli, "converge", Some(&cfg));
    m.summary = json!({ "name": cfg.name, "errors": study.errors(), "fit": study.fit });
    m.write(&mut log)?;
    Ok(())
}

fn bounds(cli: &Cli, args: &BoundsArgs) -> Result<()> {
    let cfg = need_config(cli)?;
    let study = if cfg.study.is_some() {
        Some(run_convergence_study(&cfg)?)
    } else {
        None
    };
    let mut reports = audit_bounds(&cfg, study.as_ref())?;
    if let (Some(a), Some(b)) = (&args.measure, &args.against) {
        let ta = read_trajectory(a, "", cfg.kind, cfg.scheme.clone())?;
        let tb = read_trajectory(b, "", cfg.kind, cfg.scheme.clone())?;
        let d = trajectory_distance_detailed(&ta, &tb, cfg.scheme.p, cfg.scheme.quadrature)?;
        let model = cfg.single()?.1;
        let c = model.constants()?;
        let bound = apriori_bound(cfg.kind, &c, &cfg.scheme, cfg.dim())?;
        reports.insert(
            0,
            wasserflow::bounds::BoundReport {
                name: format!("{}_against", cfg.kind.name()),
                inputs: wasserflow::bounds::BoundInputs {
                    l: c.l,
                    m: c.m,
                    k: c.k,
                    p: cfg.scheme.p,
                    t: cfg.scheme.t_final,
                    dt: cfg.scheme.dt,
                    dx: cfg.scheme.dx,
                    n: cfg.dim(),
                    mass: 1.0,
                },
                bound: bound.value,
                measured: Some(d.sup()),
                slack: 2.0 * d.halo(),
                hypothesis_ok: bound.hypothesis_ok,
            },
        );
    }
    let mut log = FileLog::new(&cli.out)?;
    write_csv(&log.path("bounds.csv"), &bound_rows(&reports))?;
    let failed = reports.iter().filter(|r| !r.passes()).count();
    println!("{} bound checks, {} violations", reports.len(), failed);
    let mut m = manifest(cli, "bounds", Some(&cfg));
    m.inputs.extend(args.measure.iter().chain(&args.against).map(|p| p.display().to_string()));
    m.summary = json!({ "checks": reports.len(), "violations": failed });
    m.write(&mut log)?;
    if failed > 0 {
        return Err(Error::Config(format!("{failed} bound violations")));
    }
    Ok(())
}

fn ot(args: &OtArgs) -> Result<()> {
    let a = read_measure(&args.a)?;
    let b = read_measure(&args.b)?;
    let d = wasserstein_measures(&a, &b, args.p, args.quadrature)?;
    println!("value {:?}", d.estimate);
    println!("halo {:?}", d.halo);
    if let Some(path) = &args.plan {
        let qa = to_quadrature(&a, args.quadrature)?;
        let qb = to_quadrature(&b, args.quadrature)?;
        let res = wasserstein_atoms(&qa, &qb, args.p)?;
        #[derive(Serialize)]
        struct Row {
            i: usize,
            j: usize,
            mass: f64,
        }
        let rows: Vec<Row> = res.plan.entries.iter().map(|&(i, j, mass)| Row { i, j, mass }).collect();
        write_csv(path, &rows)?;
    }
    Ok(())
}

fn counterexample(cli: &Cli, args: &CounterexampleArgs) -> Result<()> {
    let fam = NuFamily::new(args.truncation)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cli.seed.unwrap_or(0));
    let l1 = verify_l1_lipschitz(&fam, &sample_pairs(&mut rng, args.pairs))?;
    let wp = verify_wp_blowup(&fam, args.p, &shrinking_pairs(), args.quadrature)?;
    let nu = demonstrate_nonuniqueness(&fam, 1.0, args.dt)?;
    let mut log = FileLog::new(&cli.out)?;

    #[derive(Serialize)]
    struct L1Out {
        t: f64,
        s: f64,
        lhs: f64,
        rhs: f64,
    }
    let rows: Vec<L1Out> = l1
        .rows
        .iter()
        .map(|r| L1Out {
            t: r.t,
            s: r.s,
            lhs: r.lhs,
            rhs: r.rhs,
        })
        .collect();
    write_csv(&log.path("l1_lipschitz.csv"), &rows)?;

    #[derive(Serialize)]
    struct WpOut {
        t: f64,
        s: f64,
        #[serde(rename = "W_p")]
        w_p: f64,
        ratio: f64,
    }
    let rows: Vec<WpOut> = wp
        .rows
        .iter()
        .map(|r| WpOut {
            t: r.t,
            s: r.s,
            w_p: r.measured,
            ratio: r.ratio,
        })
        .collect();
    write_csv(&log.path("wp_ratio.csv"), &rows)?;

    let verdict = |ok: bool| if ok { "pass" } else { "fail" };
    let text = format!(
        "stationary_fixed_point {}\nvertical_shift_identity {}\nvelocity_along_path {} (max error {:e})\nl1_lipschitz {} (max ratio {:.6})\nwp_blowup {}\n",
        verdict(nu.stationary_ok),
        verdict(nu.shift_ok),
        verdict(nu.velocity_ok),
        nu.max_velocity_error,
        verdict(l1.passes()),
        l1.max_ratio(),
        verdict(wp.passes()),
    );
    std::fs::write(log.path("nonuniqueness.txt"), &text)?;
    print!("{text}");

    for (prefix, frames) in [("stationary_", &nu.stationary), ("moving_", &nu.moving)] {
        let atoms = frames
            .iter()
            .map(|(_, s)| s.to_atoms(args.quadrature).map(Measure::Atoms))
            .collect::<Result<Vec<_>>>()?;
        write_frames(&mut log, prefix, atoms.iter())?;
    }
    let mut m = manifest(cli, "counterexample", None);
    m.summary = json!({
        "truncation": fam.truncation,
        "stationary_ok": nu.stationary_ok,
        "shift_ok": nu.shift_ok,
        "velocity_ok": nu.velocity_ok,
        "l1_max_ratio": l1.max_ratio(),
        "l1_ok": l1.passes(),
        "wp_ok": wp.passes(),
    });
    m.write(&mut log)?;
    Ok(())
}

fn demo(cli: &Cli, demo: &Demo) -> Result<()> {
    let Demo::F1Discontinuity {
        r,
        eps,
        radius,
        p,
        resolution,
    } = demo;
    let ts: Vec<f64> = (0..=10).map(|k| k as f64 * 0.01).collect();
    let report = f1_discontinuity_demo(*r, *eps, *radius, &ts, *p, *resolution)?;
    let mut log = FileLog::new(&cli.out)?;
    #[derive(Serialize)]
    struct Row {
        t: f64,
        #[serde(rename = "|v|")]
        speed: f64,
        #[serde(rename = "W_p bound")]
        bound: f64,
        #[serde(rename = "W_p measured")]
        measured: f64,
        halo: f64,
    }
    let rows: Vec<Row> = report
        .rows
        .iter()
        .map(|x| Row {
            t: x.t,
            speed: x.speed,
            bound: x.bound,
            measured: x.measured,
            halo: x.halo,
        })
        .collect();
    write_csv(&log.path("f1_discontinuity.csv"), &rows)?;
    for x in &report.rows {
        println!("t {:<5} |v| {:.6} W_p {:.6} bound {:.6}", x.t, x.speed, x.measured, x.bound);
    }
    println!("{}", if report.passes() { "pass" } else { "fail" });
    let mut m = manifest(cli, "demo f1-discontinuity", None);
    m.summary = json!({ "passes": report.passes(), "r": r, "eps": eps, "radius": radius, "p": p });
    m.write(&mut log)?;
    Ok(())
}

fn run(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Simulate => simulate(cli),
        Command::Converge => converge(cli),
        Command::Bounds(a) => bounds(cli, a),
        Command::Ot(a) => ot(a),
        Command::Counterexample(a) => counterexample(cli, a),
        Command::Demo(d) => demo(cli, d),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if cli.threads > 0 {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(cli.threads).build_global() {
            eprintln!("error: {e}");
            return ExitCode::FAILURE;
        }
    }
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
