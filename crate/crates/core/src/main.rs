//! Command-line front end: reproducible batch workflows over the library.
//!
//! Exit codes: 0 success, 2 input/parse error, 3 numerical failure.

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use manifold::arclength::{self, ArcPoint};
use manifold::attention::{
    decode, iterate_attention, stub_encoder, total_loss, DecoderOutput, LossTarget, LossWeights,
    QueryPoint, Scorer, StubScorer,
};
use manifold::config::RunConfig;
use manifold::coplanarity;
use manifold::inversion::invert_point;
use manifold::io;
use manifold::sampler;
use manifold::surface::{fit_control_net, ControlNet, ParamPoint, SurfacePoint};
use manifold::{Error, Result};

#[derive(Parser)]
#[command(name = "manifold", version, about = "Bézier scene-manifold toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit a control net to a heightmap CSV (header rows,cols,length,width,
    /// then a rows×cols grid of z values over [0,length]×[0,width]).
    Fit(FitArgs),
    /// Evaluate a control net at (u,v) parameter rows.
    Eval(EvalArgs),
    /// Invert 3-D points to (u,v) against a control net.
    Invert(InvertArgs),
    /// Map (u,v) rows to the arc-length chart, or back with --inverse.
    Arclength(ArclengthArgs),
    /// Edge-aware sampling of a semantic occupancy grid.
    Sample(SampleArgs),
    /// Sweep the flat-ground localization error over inclination.
    Coplanarity(CoplanarityArgs),
    /// Run the attention forward pipeline over query rows.
    Pipeline(PipelineArgs),
}

#[derive(Args)]
struct FitArgs {
    /// heightmap CSV
    #[arg(long)]
    input: PathBuf,
    #[arg(long, default_value_t = 7)]
    e: usize,
    #[arg(long, default_value_t = 5)]
    f: usize,
    #[arg(long, default_value_t = 0.0)]
    ridge: f64,
    /// output controlnet.json
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    net: PathBuf,
    /// CSV of u,v rows
    #[arg(long)]
    params: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct InvertArgs {
    #[arg(long)]
    net: PathBuf,
    /// CSV of x,y,z rows
    #[arg(long)]
    points: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 1e-10)]
    tol: f64,
    #[arg(long, default_value_t = 100)]
    max_iter: usize,
}

#[derive(Args)]
struct ArclengthArgs {
    #[arg(long)]
    net: PathBuf,
    /// CSV of u,v rows (or s_u,s_v rows with --inverse)
    #[arg(long)]
    params: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = arclength::DEFAULT_QUAD_ORDER)]
    quad_order: usize,
    /// map arc-length rows back to (u,v)
    #[arg(long)]
    inverse: bool,
    #[arg(long, default_value_t = 0.5)]
    anchor_u: f64,
    #[arg(long, default_value_t = 0.5)]
    anchor_v: f64,
    #[arg(long, default_value_t = 1e-10)]
    tol: f64,
}

#[derive(Args)]
struct SampleArgs {
    /// SOG CSV (or 8-bit PGM)
    #[arg(long)]
    sog: PathBuf,
    #[arg(long, default_value_t = sampler::DEFAULT_K)]
    k: usize,
    #[arg(long, default_value_t = sampler::DEFAULT_TAU)]
    tau: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 4)]
    bins: usize,
    /// resample with seed+1, seed+2, … until coverage loss ≤ this
    #[arg(long)]
    max_coverage_loss: Option<f64>,
    /// resolution for PGM inputs, meters/cell
    #[arg(long, default_value_t = 0.5)]
    pgm_resolution: f64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct CoplanarityArgs {
    #[arg(long, default_value_t = 1.0)]
    h: f64,
    #[arg(long, default_value_t = 1.0)]
    d: f64,
    #[arg(long, default_value_t = 0.0)]
    theta_min_deg: f64,
    #[arg(long)]
    theta_max_deg: f64,
    #[arg(long, default_value_t = 100)]
    steps: usize,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct PipelineArgs {
    /// TOML run configuration; flags override file values
    #[arg(long)]
    config: Option<PathBuf>,
    /// CSV of x,y,z,t,x',y',z' rows
    #[arg(long)]
    queries: PathBuf,
    /// optional SOG whose sampled cells are mapped onto the surface
    #[arg(long)]
    sog: Option<PathBuf>,
    /// optional control net used for the arc-length mapping; defaults to
    /// the decoded one
    #[arg(long)]
    net: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// replace the stub scorer with an all-zeros scorer
    #[arg(long)]
    zero_scorer: bool,
    /// assert the final pooled vector equals the feature column mean
    /// (meaningful with --zero-scorer)
    #[arg(long)]
    check_pooled_mean: bool,
    /// compute the composite loss against targets synthesized from the
    /// predictions themselves and print it (a zero-loss plumbing check)
    #[arg(long)]
    self_loss: bool,
    #[arg(long)]
    out: PathBuf,
}

fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Parse { .. } | Error::InvalidArgument(_) | Error::Domain(_) | Error::Io(_) => 2,
        Error::SingularSystem(_)
        | Error::DegenerateSurface(_)
        | Error::DegenerateMetric(_)
        | Error::IllConditionedJacobian { .. }
        | Error::ArcLengthOutOfRange { .. }
        | Error::DivergentGeometry(_)
        | Error::ContractViolation(_) => 3,
    }
}

fn main() {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Fit(a) => cmd_fit(a),
        Command::Eval(a) => cmd_eval(a),
        Command::Invert(a) => cmd_invert(a),
        Command::Arclength(a) => cmd_arclength(a),
        Command::Sample(a) => cmd_sample(a),
        Command::Coplanarity(a) => cmd_coplanarity(a),
        Command::Pipeline(a) => cmd_pipeline(a),
    };
    if let Err(e) = result {
        eprintln!("error: {e}");
        std::process::exit(exit_code(&e));
    }
}

fn read_to_string(path: &Path) -> Result<String> {
    Ok(fs::read_to_string(path)?)
}

fn cmd_fit(a: FitArgs) -> Result<()> {
    let text = read_to_string(&a.input)?;
    let mut lines = text.lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::Parse { line: 1, msg: "empty heightmap".into() })?;
    let fields: Vec<&str> = header.split(',').map(str::trim).collect();
    if fields.len() != 4 {
        return Err(Error::Parse {
            line: 1,
            msg: "heightmap header needs rows,cols,length,width".into(),
        });
    }
    let rows: usize = fields[0]
        .parse()
        .map_err(|_| Error::Parse { line: 1, msg: format!("bad rows {:?}", fields[0]) })?;
    let cols: usize = fields[1]
        .parse()
        .map_err(|_| Error::Parse { line: 1, msg: format!("bad cols {:?}", fields[1]) })?;
    let length: f64 = fields[2]
        .parse()
        .map_err(|_| Error::Parse { line: 1, msg: format!("bad length {:?}", fields[2]) })?;
    let width: f64 = fields[3]
        .parse()
        .map_err(|_| Error::Parse { line: 1, msg: format!("bad width {:?}", fields[3]) })?;
    if rows < 2 || cols < 2 {
        return Err(Error::Parse { line: 1, msg: "heightmap needs at least 2×2 cells".into() });
    }

    let mut samples = Vec::with_capacity(rows * cols);
    let mut count = 0usize;
    for (idx, line) in lines.enumerate() {
        for tok in line.split(',').map(str::trim).filter(|s| !s.is_empty()) {
            let z: f64 = tok
                .parse()
                .map_err(|_| Error::Parse { line: idx + 2, msg: format!("bad height {tok:?}") })?;
            let (i, j) = (count / cols, count % cols);
            if i >= rows {
                return Err(Error::Parse { line: idx + 2, msg: "too many height values".into() });
            }
            let u = i as f64 / (rows - 1) as f64;
            let v = j as f64 / (cols - 1) as f64;
            samples.push((
                ParamPoint::new(u, v)?,
                SurfacePoint::new(u * length, v * width, z),
            ));
            count += 1;
        }
    }
    if count != rows * cols {
        return Err(Error::Parse {
            line: text.lines().count(),
            msg: format!("expected {} heights, got {count}", rows * cols),
        });
    }

    let (net, residual) = fit_control_net(&samples, a.e, a.f, a.ridge)?;
    io::write_control_net(&a.out, &net)?;
    eprintln!("fit residual (rms): {residual:.6e}");
    Ok(())
}

fn cmd_eval(a: EvalArgs) -> Result<()> {
    let net: ControlNet<f64> = io::read_control_net(&a.net)?;
    let rows = io::read_numeric_csv(&read_to_string(&a.params)?, 2)?;
    let mut out = String::from("x,y,z\n");
    for (_, row) in rows {
        let p = net.evaluate(ParamPoint::new(row[0], row[1])?)?;
        out.push_str(&format!("{:.16e},{:.16e},{:.16e}\n", p.x, p.y, p.z));
    }
    fs::write(&a.out, out)?;
    Ok(())
}

fn cmd_invert(a: InvertArgs) -> Result<()> {
    let net: ControlNet<f64> = io::read_control_net(&a.net)?;
    let rows = io::read_numeric_csv(&read_to_string(&a.points)?, 3)?;
    let mut out = String::from("u,v,residual,converged\n");
    for (_, row) in rows {
        let q = SurfacePoint::new(row[0], row[1], row[2]);
        let res = invert_point(&net, q, None, a.tol, a.max_iter)?;
        out.push_str(&format!(
            "{:.16e},{:.16e},{:.16e},{}\n",
            res.p.u,
            res.p.v,
            res.residual,
            res.converged as u8
        ));
    }
    fs::write(&a.out, out)?;
    Ok(())
}

fn cmd_arclength(a: ArclengthArgs) -> Result<()> {
    let net: ControlNet<f64> = io::read_control_net(&a.net)?;
    let rows = io::read_numeric_csv(&read_to_string(&a.params)?, 2)?;
    let mut out = String::new();
    if a.inverse {
        out.push_str("u,v\n");
        let anchor = ParamPoint::new(a.anchor_u, a.anchor_v)?;
        for (_, row) in rows {
            let p = arclength::from_arclength_with_order(
                &net,
                ArcPoint { s_u: row[0], s_v: row[1] },
                anchor,
                a.tol,
                a.quad_order,
            )?;
            out.push_str(&format!("{:.16e},{:.16e}\n", p.u, p.v));
        }
    } else {
        out.push_str("s_u,s_v\n");
        for (_, row) in rows {
            let p = ParamPoint::new(row[0], row[1])?;
            let arc = arclength::to_arclength(&net, p, a.quad_order)?;
            out.push_str(&format!("{:.16e},{:.16e}\n", arc.s_u, arc.s_v));
        }
    }
    fs::write(&a.out, out)?;
    Ok(())
}

fn cmd_sample(a: SampleArgs) -> Result<()> {
    let sog = io::read_sog(&a.sog, a.pgm_resolution, sampler::DEFAULT_M, 1)?;
    let (set, loss) = match a.max_coverage_loss {
        Some(th) => sampler::sample_with_coverage(&sog, a.k, a.tau, a.seed, a.bins, th)?,
        None => {
            let set = sampler::sample_queries(&sog, a.k, a.tau, a.seed)?;
            let loss = sampler::coverage_loss(&set, &sog, a.bins)?;
            (set, loss)
        }
    };
    let mut out = String::from("class,col,row,s_u,s_v,weight\n");
    for s in set.iter() {
        out.push_str(&format!(
            "{},{},{},{:.16e},{:.16e},{:.16e}\n",
            s.class, s.col, s.row, s.s_u, s.s_v, s.weight
        ));
    }
    fs::write(&a.out, out)?;
    println!("coverage_loss: {loss}");
    Ok(())
}

fn cmd_coplanarity(a: CoplanarityArgs) -> Result<()> {
    let table = coplanarity::sweep(
        a.h,
        a.d,
        a.theta_min_deg.to_radians(),
        a.theta_max_deg.to_radians(),
        a.steps,
    )?;
    let mut out = String::from("theta_rad,error,err_longitudinal,err_vertical\n");
    for r in &table.rows {
        out.push_str(&format!(
            "{:.8e},{:.8e},{:.8e},{:.8e}\n",
            r.theta, r.error, r.err_longitudinal, r.err_vertical
        ));
    }
    fs::write(&a.out, out)?;
    if table.truncated {
        eprintln!(
            "warning: sweep truncated at the validity boundary (theta < atan(h/d) = {:.4} rad)",
            (a.h / a.d).atan()
        );
    }
    Ok(())
}

/// Maps an arc-length point onto the surface, clamping to the chart range;
/// NaNs on a degenerate metric so one bad row cannot sink a batch.
fn map_arc_to_xyz(net: &ControlNet<f64>, s_u: f64, s_v: f64, quad_order: usize) -> (f64, f64, f64) {
    let inner = || -> Result<SurfacePoint<f64>> {
        let anchor = ParamPoint::new(0.5, 0.5)?;
        let total_u = arclength::total_u_length(net, anchor.v, quad_order)?;
        let total_v = arclength::total_v_length(net, anchor.u, quad_order)?;
        let arc = ArcPoint {
            s_u: s_u.clamp(0.0, total_u),
            s_v: s_v.clamp(0.0, total_v),
        };
        let p = arclength::from_arclength_with_order(net, arc, anchor, 1e-8, quad_order)?;
        net.evaluate(p)
    };
    match inner() {
        Ok(p) => (p.x, p.y, p.z),
        Err(_) => (f64::NAN, f64::NAN, f64::NAN),
    }
}

fn cmd_pipeline(a: PipelineArgs) -> Result<()> {
    let mut cfg = match &a.config {
        Some(path) => RunConfig::from_toml_str(&read_to_string(path)?)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = a.seed {
        cfg.seed = seed;
    }
    cfg.validate()?;

    let query_rows = io::read_numeric_csv(&read_to_string(&a.queries)?, 7)?;
    let queries: Vec<QueryPoint> = query_rows
        .iter()
        .map(|(_, r)| QueryPoint {
            x: r[0],
            y: r[1],
            z: r[2],
            t: r[3],
            x_target: r[4],
            y_target: r[5],
            z_target: r[6],
        })
        .collect();

    let z = stub_encoder(cfg.seed, cfg.s, cfg.t, cfg.p, cfg.c, cfg.speed)?;
    let rows = cfg.s * cfg.t * cfg.p;
    let stub;
    let zero;
    let scorer: &dyn Scorer = if a.zero_scorer {
        zero = move |_: &QueryPoint, _: &[f64]| vec![0.0; rows];
        &zero
    } else {
        stub = StubScorer::new(cfg.seed.wrapping_add(1), rows, cfg.c);
        &stub
    };

    let mut preds: Vec<Vec<DecoderOutput>> = Vec::with_capacity(queries.len());
    for q in &queries {
        let states = iterate_attention(&z, q, scorer, cfg.n)?;
        if a.check_pooled_mean {
            let mean = z.data.mean_axis(ndarray::Axis(0)).unwrap();
            let last = &states[cfg.n].pooled;
            let max_dev = last
                .iter()
                .zip(mean.iter())
                .map(|(a, b)| (a - b).abs())
                .fold(0.0f64, f64::max);
            if max_dev > 1e-9 {
                return Err(Error::ContractViolation(format!(
                    "pooled vector deviates from the column mean by {max_dev:.3e}"
                )));
            }
        }
        let outs: Result<Vec<DecoderOutput>> = states[1..]
            .iter()
            .map(|st| decode(st, q, cfg.seed.wrapping_add(2), cfg.m, cfg.e, cfg.f))
            .collect();
        preds.push(outs?);
    }
    if a.check_pooled_mean {
        eprintln!("pooled-mean check: ok");
    }

    // control net for the arc-length mapping: explicit file wins, otherwise
    // the first query's final decoded net (when it is a usable patch)
    let mapping_net: Option<ControlNet<f64>> = match &a.net {
        Some(path) => Some(io::read_control_net(path)?),
        None => preds.first().and_then(|outs| {
            let cp = &outs[outs.len() - 1].control_points;
            let pts: Vec<SurfacePoint<f64>> = cp
                .rows()
                .into_iter()
                .map(|r| SurfacePoint::new(r[0], r[1], r[2]))
                .collect();
            ControlNet::new(cfg.e, cfg.f, pts).ok()
        }),
    };

    let mut out = String::from("kind,index,class,offset_su,offset_sv,x,y,z\n");
    for (i, outs) in preds.iter().enumerate() {
        let last = &outs[outs.len() - 1];
        let class = last
            .semantics
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
            .map(|(i, _)| i)
            .unwrap();
        let (x, y, zc) = match &mapping_net {
            Some(net) => map_arc_to_xyz(net, last.offset[0], last.offset[1], cfg.quad_order),
            None => (f64::NAN, f64::NAN, f64::NAN),
        };
        out.push_str(&format!(
            "query,{i},{class},{:.16e},{:.16e},{x:.16e},{y:.16e},{zc:.16e}\n",
            last.offset[0], last.offset[1]
        ));
    }

    if let Some(sog_path) = &a.sog {
        let sog = io::read_sog(sog_path, 0.5, cfg.m, 1)?;
        let set = sampler::sample_queries(&sog, cfg.k, cfg.tau, cfg.seed)?;
        let loss = sampler::coverage_loss(&set, &sog, cfg.bins)?;
        for (i, s) in set.iter().enumerate() {
            let (x, y, zc) = match &mapping_net {
                Some(net) => map_arc_to_xyz(net, s.s_u, s.s_v, cfg.quad_order),
                None => (f64::NAN, f64::NAN, f64::NAN),
            };
            out.push_str(&format!(
                "sample,{i},{},{:.16e},{:.16e},{x:.16e},{y:.16e},{zc:.16e}\n",
                s.class, s.s_u, s.s_v
            ));
        }
        println!("coverage_loss: {loss}");
    }
    fs::write(&a.out, out)?;

    if a.self_loss {
        // synthesize targets from the final predictions (saturated one-hot
        // semantics), feed them back, and confirm the loss vanishes
        let first = &preds[0][preds[0].len() - 1];
        let target = LossTarget {
            control_points: first.control_points.clone(),
            classes: preds
                .iter()
                .map(|outs| {
                    let last = &outs[outs.len() - 1];
                    last.semantics
                        .iter()
                        .enumerate()
                        .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
                        .map(|(i, _)| i)
                        .unwrap()
                })
                .collect(),
            offsets: preds
                .iter()
                .map(|outs| outs[outs.len() - 1].offset)
                .collect(),
        };
        let perfect: Vec<Vec<DecoderOutput>> = target
            .classes
            .iter()
            .zip(&target.offsets)
            .map(|(&class, &offset)| {
                let mut semantics = vec![0.0; cfg.m];
                semantics[class] = 50.0;
                vec![DecoderOutput {
                    semantics,
                    offset,
                    control_points: target.control_points.clone(),
                }]
            })
            .collect();
        let loss = total_loss(
            &perfect,
            &target,
            LossWeights { eta_pc: cfg.eta_pc, eta_off: cfg.eta_off, eta_ce: cfg.eta_ce },
        )?;
        println!("self_loss: {loss:.6e}");
    }

    Ok(())
}
