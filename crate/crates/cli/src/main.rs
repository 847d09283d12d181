//! `conekit`: generate instances, run single computations, and run seeded
//! verification campaigns.
//!
//! Exit codes: 0 success, 1 I/O or parse failure, 2 violated precondition,
//! 3 a hard campaign invariant failed.

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand, ValueEnum};
use nalgebra::DVector;
use serde_json::{json, Value};

use conekit_core::campaign::{self, CampaignParams};
use conekit_core::clustering::{cluster_comparable, cluster_refine, cluster_split, PointSet};
use conekit_core::cone::{layer_subdivide, prune, trace_hausdorff, GapMatrix, PlaneCone, DEFAULT_TRACE_RESOLUTION};
use conekit_core::excess::{
    planar_excess, read_current, reverse_excess, synth_cone_sample, tilt_excess_nonoriented,
    tilt_excess_oriented, one_sided_excess, write_current, BodyFormat, Cylinder, SampledCurrent, SynthParams,
    DEFAULT_RESOLUTION, DEFAULT_SPINE_CUTOFF,
};
use conekit_core::geometry::{morgan_angles, principal_angles, unit_ball_hausdorff};
use conekit_core::random::{plane_pair_with_angles, random_balanced_cone, random_cone};
use conekit_core::sampling;
use conekit_core::whitney::{
    classify_cubes, cubes_at_generation, generation_measure, layer_separations, root_measure, CurrentOracle,
    WhitneyGeometry, DEFAULT_RHO_STAR,
};
use conekit_core::{Error, Subspace};

#[derive(Parser)]
#[command(name = "conekit", version, about = "Plane, cone and excess computations with certificates")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a cone (and optionally a sampled current) to disk.
    Gen(GenArgs),
    /// Run one computation and print a JSON object.
    Compute {
        #[command(subcommand)]
        what: Compute,
    },
    /// Run a seeded verification campaign.
    Verify(VerifyArgs),
}

#[derive(Args)]
struct GenArgs {
    #[arg(long, default_value_t = 3)]
    m: usize,
    #[arg(long, default_value_t = 2)]
    n: usize,
    /// Number of planes.
    #[arg(long = "N", default_value_t = 2)]
    planes: usize,
    /// Capacity Q (defaults to the number of planes).
    #[arg(long = "Q")]
    capacity: Option<usize>,
    /// Both Morgan angles of a two-plane cone.
    #[arg(long, conflicts_with = "angles")]
    angle: Option<f64>,
    /// The two Morgan angles of a two-plane cone, comma separated.
    #[arg(long, value_delimiter = ',', num_args = 2)]
    angles: Option<Vec<f64>>,
    /// Draw an M-balanced cone.
    #[arg(long = "balanced")]
    balanced: Option<f64>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output path (cone JSON, or the current with `--current`).
    #[arg(long)]
    out: PathBuf,
    /// Also (or instead) sample a current near the cone.
    #[arg(long)]
    current: bool,
    /// Read the cone instead of generating it.
    #[arg(long)]
    cone: Option<PathBuf>,
    /// Where to write the generated cone when `--current` is set.
    #[arg(long)]
    cone_out: Option<PathBuf>,
    #[arg(long, default_value_t = 0.0)]
    h: f64,
    #[arg(long, default_value_t = 0.0)]
    noise: f64,
    #[arg(long, default_value_t = 1000)]
    density: usize,
    #[arg(long, default_value_t = 0.0)]
    cutoff: f64,
    #[arg(long)]
    frames: bool,
    #[arg(long, value_enum, default_value_t = Body::Csv)]
    body: Body,
}

#[derive(Clone, Copy, ValueEnum)]
enum Body {
    Csv,
    Binary,
}

#[derive(Clone, Copy, ValueEnum)]
enum ReportFormat {
    Json,
    Csv,
}

#[derive(Clone, Copy, ValueEnum)]
enum Lemma {
    Comparable,
    Refine,
    Split,
}

#[derive(Subcommand)]
enum Compute {
    /// Morgan and principal angles of two subspaces.
    Angles { a: PathBuf, b: PathBuf },
    /// Unit-ball Hausdorff distance of two subspaces or two cone traces.
    Hausdorff {
        a: PathBuf,
        b: PathBuf,
        #[arg(long, default_value_t = DEFAULT_TRACE_RESOLUTION)]
        resolution: usize,
    },
    /// σ and μ of a cone, and its balance for a given M.
    SigmaMu {
        cone: PathBuf,
        #[arg(long = "M")]
        big_m: Option<f64>,
    },
    /// One-sided, reverse and two-sided excess.
    Excess {
        #[arg(long)]
        current: PathBuf,
        #[arg(long)]
        cone: PathBuf,
        #[command(flatten)]
        ball: BallArgs,
        #[arg(long, default_value_t = DEFAULT_SPINE_CUTOFF)]
        a: f64,
        #[arg(long, default_value_t = DEFAULT_RESOLUTION)]
        resolution: usize,
    },
    /// Best-fit plane through the center and its excess.
    Planar {
        #[arg(long)]
        current: PathBuf,
        #[command(flatten)]
        ball: BallArgs,
        #[arg(long)]
        m: Option<usize>,
    },
    /// Oriented and non-oriented tilt excess in a cylinder.
    Tilt {
        #[arg(long)]
        current: PathBuf,
        /// Subspace JSON for the plane π (also the cylinder axis).
        #[arg(long)]
        plane: PathBuf,
        #[command(flatten)]
        ball: BallArgs,
        #[arg(long, default_value_t = 1.0, allow_hyphen_values = true)]
        sign: f64,
    },
    /// Prune a gap matrix at scale D.
    Prune {
        #[arg(long)]
        gaps: PathBuf,
        #[arg(long = "D")]
        d: f64,
        #[arg(long)]
        delta: f64,
    },
    /// Layer subdivision of a gap matrix.
    Layers {
        #[arg(long)]
        gaps: PathBuf,
        #[arg(long)]
        delta: f64,
    },
    /// Clustering of a point set.
    Cluster {
        #[arg(long)]
        points: PathBuf,
        #[arg(long, value_enum)]
        lemma: Lemma,
        #[arg(long)]
        delta: Option<f64>,
        #[arg(long)]
        eps: Option<f64>,
    },
    /// Whitney cube structure, or cube labels for a current near a cone.
    Whitney {
        #[arg(long, default_value_t = 3)]
        m: usize,
        #[arg(long, default_value_t = 3)]
        depth: u32,
        #[arg(long, requires = "cone")]
        current: Option<PathBuf>,
        #[arg(long)]
        cone: Option<PathBuf>,
        #[arg(long, default_value_t = 0.1)]
        tau: f64,
        /// δ for the layer subdivision.
        #[arg(long, default_value_t = 0.5)]
        delta: f64,
        /// Separation used for single-plane layers.
        #[arg(long, default_value_t = 0.25)]
        delta_bar: f64,
        #[arg(long, default_value_t = DEFAULT_RHO_STAR)]
        rho_star: f64,
        /// Write one JSON line per cube here.
        #[arg(long)]
        dump: Option<PathBuf>,
    },
}

#[derive(Args)]
struct BallArgs {
    /// Center, comma separated (defaults to the origin).
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    center: Option<Vec<f64>>,
    #[arg(long, default_value_t = 1.0)]
    radius: f64,
}

impl BallArgs {
    fn center(&self, ambient: usize) -> anyhow::Result<DVector<f64>> {
        match &self.center {
            None => Ok(DVector::zeros(ambient)),
            Some(c) if c.len() == ambient => Ok(DVector::from_column_slice(c)),
            Some(c) => Err(Error::DimensionMismatch {
                expected: ambient,
                got: c.len(),
            }
            .into()),
        }
    }
}

#[derive(Args)]
struct VerifyArgs {
    /// Campaign name; `--list` shows all.
    #[arg(required_unless_present = "list")]
    campaign: Option<String>,
    #[arg(long)]
    list: bool,
    #[arg(long, default_value_t = 1000)]
    trials: u64,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Report path.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = ReportFormat::Json)]
    format: ReportFormat,
    /// Campaign parameters as JSON (fields of the parameter set); flags below override.
    #[arg(long)]
    params: Option<PathBuf>,
    #[arg(long)]
    m: Option<usize>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long = "N")]
    planes: Option<usize>,
    #[arg(long)]
    max_planes: Option<usize>,
    #[arg(long)]
    delta: Option<f64>,
    #[arg(long = "M")]
    big_m: Option<f64>,
    #[arg(long)]
    depth: Option<u32>,
    #[arg(long)]
    resolution: Option<usize>,
    #[arg(long)]
    samples: Option<usize>,
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> anyhow::Result<T> {
    let f = File::open(path).map_err(Error::from).with_context(|| path.display().to_string())?;
    let v = serde_json::from_reader(BufReader::new(f)).map_err(|e| {
        // data errors (bad frames, invalid cones) are preconditions, syntax errors are parse failures
        if e.is_data() {
            anyhow::Error::from(Error::InvalidParameter(e.to_string()))
        } else {
            anyhow::Error::from(Error::from(e))
        }
    })?;
    Ok(v)
}

fn write_file(path: &Path, bytes: &[u8]) -> anyhow::Result<()> {
    std::fs::write(path, bytes)
        .map_err(Error::from)
        .with_context(|| path.display().to_string())
}

fn load_current(path: &Path) -> anyhow::Result<SampledCurrent> {
    let f = File::open(path).map_err(Error::from).with_context(|| path.display().to_string())?;
    Ok(read_current(&mut BufReader::new(f))?)
}

fn gen(args: GenArgs) -> anyhow::Result<Value> {
    let mut rng = sampling::rng(args.seed);
    let capacity = args.capacity.unwrap_or(args.planes);
    let cone = if let Some(path) = &args.cone {
        read_json::<PlaneCone>(path)?
    } else if args.angle.is_some() || args.angles.is_some() {
        if args.planes != 2 {
            return Err(Error::InvalidParameter("prescribed angles need --N 2".into()).into());
        }
        let (t1, t2) = match (&args.angle, &args.angles) {
            (Some(t), _) => (*t, *t),
            (_, Some(v)) => (v[0], v[1]),
            _ => unreachable!(),
        };
        let c = plane_pair_with_angles(args.m, args.n, t1, t2, &mut rng)?;
        if capacity != 2 {
            PlaneCone::new(args.m, capacity, c.spine().clone(), c.planes().to_vec())?
        } else {
            c
        }
    } else if let Some(big_m) = args.balanced {
        random_balanced_cone(args.m, args.n, args.planes, big_m, &mut rng)?
    } else {
        random_cone(args.m, args.n, args.planes, capacity, &mut rng)?
    };
    let cone_json = serde_json::to_vec_pretty(&cone)?;
    if !args.current {
        write_file(&args.out, &cone_json)?;
        return Ok(json!({ "cone": args.out, "N": cone.len(), "ambient": cone.ambient_dim() }));
    }
    if let Some(path) = &args.cone_out {
        write_file(path, &cone_json)?;
    }
    let params = SynthParams {
        amplitude: args.h,
        noise: args.noise,
        density: args.density,
        inner_cutoff: args.cutoff,
        frames: args.frames,
        seed: sampling::split_seed(args.seed, 1),
    };
    let t = synth_cone_sample(&cone, &params)?;
    let format = match args.body {
        Body::Csv => BodyFormat::Csv,
        Body::Binary => BodyFormat::Binary,
    };
    let mut buf = Vec::new();
    write_current(&t, format, &mut buf)?;
    write_file(&args.out, &buf)?;
    Ok(json!({ "current": args.out, "samples": t.len(), "mass": t.total_mass() }))
}

fn one_based(v: &[usize]) -> Vec<usize> {
    v.iter().map(|i| i + 1).collect()
}

fn is_cone(v: &Value) -> bool {
    v.get("planes").is_some()
}

fn compute(what: Compute) -> anyhow::Result<Value> {
    Ok(match what {
        Compute::Angles { a, b } => {
            let (a, b): (Subspace, Subspace) = (read_json(&a)?, read_json(&b)?);
            let morgan = morgan_angles(&a, &b)?;
            json!({
                "angles": morgan.angles,
                "principal": principal_angles(&a, &b)?,
                "hausdorff": unit_ball_hausdorff(&a, &b)?,
            })
        }
        Compute::Hausdorff { a, b, resolution } => {
            let (va, vb): (Value, Value) = (read_json(&a)?, read_json(&b)?);
            if is_cone(&va) || is_cone(&vb) {
                let sa: PlaneCone = serde_json::from_value(va).map_err(|e| Error::InvalidCone(e.to_string()))?;
                let sb: PlaneCone = serde_json::from_value(vb).map_err(|e| Error::InvalidCone(e.to_string()))?;
                json!({ "hausdorff": trace_hausdorff(&sa, &sb, resolution)?, "resolution": resolution })
            } else {
                let sa: Subspace = serde_json::from_value(va).map_err(|e| Error::InvalidParameter(e.to_string()))?;
                let sb: Subspace = serde_json::from_value(vb).map_err(|e| Error::InvalidParameter(e.to_string()))?;
                json!({ "hausdorff": unit_ball_hausdorff(&sa, &sb)? })
            }
        }
        Compute::SigmaMu { cone, big_m } => {
            let s: PlaneCone = read_json(&cone)?;
            let (sigma, mu) = s.sigma_mu()?;
            let mut out = json!({ "sigma": sigma, "mu": mu, "N": s.len() });
            if let Some(big_m) = big_m {
                let b = s.is_balanced(big_m);
                out["balanced"] = json!(b.balanced);
                out["worst_ratio"] = json!(b.worst_ratio);
            }
            out
        }
        Compute::Excess {
            current,
            cone,
            ball,
            a,
            resolution,
        } => {
            let t = load_current(&current)?;
            let s: PlaneCone = read_json(&cone)?;
            let q = ball.center(s.ambient_dim())?;
            let one = one_sided_excess(&t, &s, &q, ball.radius)?;
            let rev = reverse_excess(&s, &t, &q, ball.radius, a, resolution)?;
            json!({
                "one_sided": one,
                "reverse": rev,
                "two_sided": one + rev.value,
                "a": a,
                "resolution": resolution,
            })
        }
        Compute::Planar { current, ball, m } => {
            let t = load_current(&current)?;
            let q = ball.center(t.ambient_dim())?;
            let pe = planar_excess(&t, &q, ball.radius, m.unwrap_or(t.m()))?;
            json!({ "value": pe.value, "plane": pe.plane, "spectrum": pe.spectrum })
        }
        Compute::Tilt {
            current,
            plane,
            ball,
            sign,
        } => {
            let t = load_current(&current)?;
            let pi: Subspace = read_json(&plane)?;
            let q = ball.center(t.ambient_dim())?;
            let c = Cylinder::new(q, ball.radius, pi.clone())?;
            json!({
                "oriented": tilt_excess_oriented(&t, &c, &pi, sign)?,
                "nonoriented": tilt_excess_nonoriented(&t, &c, &pi)?,
            })
        }
        Compute::Prune { gaps, d, delta } => {
            let g: GapMatrix = read_json(&gaps)?;
            let c = prune(&g, d, delta)?;
            json!({
                "I": one_based(&c.kept),
                "removed": one_based(&c.removed),
                "Gamma": c.gamma,
                "eps": c.eps,
                "checks": { "reach": c.reach, "dominance": c.dominance, "diameter": c.diameter },
                "holds": c.holds(),
            })
        }
        Compute::Layers { gaps, delta } => {
            let g: GapMatrix = read_json(&gaps)?;
            let c = layer_subdivide(&g, delta)?;
            json!({
                "chain": c.chain.iter().map(|s| one_based(s)).collect::<Vec<_>>(),
                "kappa": c.kappa,
                "eta": c.eta,
                "m": c.min_gap,
                "d": c.reach,
                "M": c.max_gap,
                "checks": {
                    "diameter_kept": c.diameter_kept,
                    "diameter_constant": c.diameter_constant,
                    "final_comparable": c.final_comparable,
                    "reach": c.reach_ok,
                    "growth": c.growth_ok,
                    "chain": c.chain_ok,
                },
                "holds": c.holds(),
            })
        }
        Compute::Cluster {
            points,
            lemma,
            delta,
            eps,
        } => {
            let p: PointSet = read_json(&points)?;
            let need = |x: Option<f64>, name: &str| {
                x.ok_or_else(|| Error::InvalidParameter(format!("--{name} is required for this lemma")))
            };
            match lemma {
                Lemma::Comparable => {
                    let c = cluster_comparable(&p, need(delta, "delta")?)?;
                    json!({
                        "selected": one_based(&c.selected),
                        "removed": one_based(&c.removed),
                        "lambda": c.lambda,
                        "ratio_bound": c.ratio_bound,
                        "achieved_ratio": c.achieved_ratio,
                        "achieved_delta": c.achieved_delta,
                        "holds": c.holds(),
                    })
                }
                Lemma::Refine => {
                    let c = cluster_refine(&p, need(delta, "delta")?, need(eps, "eps")?)?;
                    json!({
                        "selected": one_based(&c.selected),
                        "removed": one_based(&c.removed),
                        "reach_bound": c.reach_bound,
                        "max_dist": c.max_dist,
                        "singleton": c.singleton,
                        "holds": c.holds(),
                    })
                }
                Lemma::Split => {
                    let c = cluster_split(&p)?;
                    json!({
                        "first": one_based(&c.first),
                        "second": one_based(&c.second),
                        "diameter": c.diameter,
                        "separation": c.separation,
                        "bound": c.bound,
                        "holds": c.holds,
                    })
                }
            }
        }
        Compute::Whitney {
            m,
            depth,
            current,
            cone,
            tau,
            delta,
            delta_bar,
            rho_star,
            dump,
        } => whitney(m, depth, current, cone, tau, delta, delta_bar, rho_star, dump)?,
    })
}

#[allow(clippy::too_many_arguments)]
fn whitney(
    m: usize,
    depth: u32,
    current: Option<PathBuf>,
    cone: Option<PathBuf>,
    tau: f64,
    delta: f64,
    delta_bar: f64,
    rho_star: f64,
    dump: Option<PathBuf>,
) -> anyhow::Result<Value> {
    let Some(current) = current else {
        let mut gens = Vec::new();
        for ell in 0..=depth {
            gens.push(json!({
                "ell": ell,
                "cubes": cubes_at_generation(ell, m)?.len(),
                "measure": generation_measure(ell, m)?,
            }));
        }
        return Ok(json!({ "m": m, "root_measure": root_measure(m), "generations": gens }));
    };
    let s: PlaneCone = read_json(cone.as_deref().expect("clap enforces --cone"))?;
    let t = load_current(&current)?;
    let layers = layer_subdivide(&s.gap_matrix(), delta)?;
    let cones = layers
        .chain
        .iter()
        .map(|c| s.sub_cone(c))
        .collect::<conekit_core::Result<Vec<_>>>()?;
    let seps = layer_separations(&s, &layers.chain, delta_bar)?;
    let geometry = WhitneyGeometry::from_cone(&s, rho_star)?;
    let oracle = CurrentOracle::new(&t, &cones, &geometry)?;
    let c = classify_cubes(s.m(), &seps, tau, depth, |l, k| oracle.excess(l, k))?;
    let lines = c.dump_lines();
    if let Some(path) = &dump {
        let f = File::create(path).map_err(Error::from).with_context(|| path.display().to_string())?;
        let mut w = BufWriter::new(f);
        for l in &lines {
            writeln!(w, "{l}").map_err(Error::from)?;
        }
        w.flush().map_err(Error::from)?;
    }
    let count = |name: &str| lines.iter().filter(|l| l.contains(&format!("\"label\":\"{name}\""))).count();
    Ok(json!({
        "layers": layers.chain.iter().map(|s| one_based(s)).collect::<Vec<_>>(),
        "separations": seps,
        "rho_star": rho_star,
        "tau": tau,
        "cubes": lines.len(),
        "outer": count("outer"),
        "central": count("central"),
        "inner": count("inner"),
        "descendant_of_inner": count("descendant-of-inner"),
        "ancestry_violations": c.ancestry_violations().len(),
    }))
}

fn verify(args: VerifyArgs) -> anyhow::Result<u8> {
    if args.list {
        for c in campaign::registry() {
            println!("{:<16} {}", c.name(), c.description());
        }
        return Ok(0);
    }
    let name = args.campaign.as_deref().expect("clap enforces a campaign");
    let c = campaign::find(name)?;
    let mut params: CampaignParams = match &args.params {
        Some(p) => read_json(p)?,
        None => CampaignParams::default(),
    };
    if let Some(v) = args.m {
        params.m = v;
    }
    if let Some(v) = args.n {
        params.n = v;
    }
    if let Some(v) = args.planes {
        params.planes = v;
    }
    if let Some(v) = args.max_planes {
        params.max_planes = v;
    }
    if args.delta.is_some() {
        params.delta = args.delta;
    }
    if let Some(v) = args.big_m {
        params.big_m = v;
    }
    if let Some(v) = args.depth {
        params.depth = v;
    }
    if let Some(v) = args.resolution {
        params.resolution = v;
    }
    if let Some(v) = args.samples {
        params.samples = v;
    }
    let report = campaign::run_campaign(c.as_ref(), &params, args.trials, args.seed, campaign::threads_from_env())?;
    if let Some(path) = &args.out {
        let bytes = match args.format {
            ReportFormat::Json => serde_json::to_vec_pretty(&report)?,
            ReportFormat::Csv => report.to_csv().into_bytes(),
        };
        write_file(path, &bytes)?;
    }
    println!("{}", report.summary_line());
    if let Some(k) = report.constant {
        println!("constant {k:e}");
    }
    Ok(if report.hard_failure() { 3 } else { 0 })
}

fn exit_code(e: &anyhow::Error) -> u8 {
    match e.downcast_ref::<Error>() {
        Some(err) if err.is_precondition() => 2,
        _ => 1,
    }
}

fn run() -> anyhow::Result<u8> {
    let cli = Cli::parse();
    match cli.command {
        Command::Gen(args) => {
            println!("{}", gen(args)?);
            Ok(0)
        }
        Command::Compute { what } => {
            println!("{}", compute(what)?);
            Ok(0)
        }
        Command::Verify(args) => verify(args),
    }
}

fn main() -> ExitCode {
    match run() {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cli_definition_is_consistent() {
        use clap::CommandFactory;
        Cli::command().debug_assert();
    }

    #[test]
    fn bail_is_io_class() {
        let e: anyhow::Error = (|| -> anyhow::Result<()> { anyhow::bail!("boom") })().unwrap_err();
        assert_eq!(exit_code(&e), 1);
    }
}
