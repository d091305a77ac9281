use std::io::Write;

use dasqos::outage::{antenna_outage_closed_form, antenna_outage_mc, expected_outage, system_outage, CellScenario};
use dasqos::placement::{radius_sweep, rm_optimize, RmStatus};
use dasqos::priority::PrioritySystem;
use dasqos::sim::{compare_with_analysis, simulate, simulate_replications, SimConfig};

use crate::config::{geometry_block, Config, OutageSpec};
use crate::error::{CliError, CliResult};
use crate::format::{opt, sig9};

/// Overrides from the command line.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub samples: Option<usize>,
    pub simulate: bool,
}

pub struct Context {
    pub config: Config,
    pub seed: u64,
    pub samples: usize,
    pub simulate: bool,
}

impl Context {
    pub fn new(config: Config, o: &Overrides) -> CliResult<Self> {
        let seed = o.seed.unwrap_or(config.run.seed);
        let samples = o.samples.unwrap_or(config.run.samples);
        if samples == 0 {
            return Err(crate::error::ConfigError::new(None, "--samples must be >= 1").into());
        }
        Ok(Self { seed, samples, simulate: o.simulate, config })
    }

    /// The per-attempt outage probability, computing it from the cell
    /// scenario in linked mode.
    fn outage_probability(&self, linked: OutageSpec) -> CliResult<f64> {
        match linked {
            OutageSpec::Fixed(p) => Ok(p),
            OutageSpec::Linked(_) => {
                let scn = self.config.scenario()?;
                let e = expected_outage(&scn, self.samples, self.seed)?;
                log::info!("linked outage probability {} (se {})", e.mean, e.std_error);
                if e.mean >= 1.0 {
                    return Err(dasqos::Error::InvalidParameter(format!("linked outage probability {} is not below 1", e.mean)).into());
                }
                Ok(e.mean)
            }
        }
    }
}

fn hex_size(cfg: &Config) -> Option<usize> {
    let g = cfg.raw.geometry.as_ref()?.get_ref();
    g.cell_centers.is_none().then_some(g.cluster_size)
}

fn warn_fallbacks(n: usize) {
    if n > 0 {
        log::warn!("{n} antenna evaluations had nearly coincident poles and used Monte Carlo");
    }
}

pub fn delay<W: Write>(ctx: &Context, out: W) -> CliResult<()> {
    let cfg = &ctx.config;
    let queue = cfg.require_queue()?;
    let p = ctx.outage_probability(queue.outage)?;
    let flows = cfg.flows(p)?;
    let settings = cfg.delay()?;
    let system = PrioritySystem::new(&flows, queue.mode)?.with_arrival_energy(queue.arrival_energy);
    let curve = system.delay_curve(settings.flow, &settings.thresholds)?;

    let mut w = csv::Writer::from_writer(out);
    if !ctx.simulate {
        w.write_record(["d_th", "prob_analytic"])?;
        for (d, prob) in &curve {
            w.write_record([sig9(*d), sig9(*prob)])?;
        }
        w.flush()?;
        return Ok(());
    }

    let sim_cfg = SimConfig::new(flows, p, cfg.run.horizon, cfg.run.warmup, ctx.seed).with_convention(settings.convention);
    let stats = if settings.replications > 1 {
        simulate_replications(&sim_cfg, settings.replications)?
    } else {
        simulate(&sim_cfg)?
    };
    if stats.unstable {
        log::warn!("simulated system is overloaded");
    }
    let hist = &stats.flow(settings.flow).delays;
    w.write_record(["flow", "d_th", "prob_sim", "ci_low", "ci_high", "prob_analytic"])?;
    for (d, prob) in &curve {
        let point = hist.ccdf(d.floor() as u64);
        w.write_record([
            settings.flow.to_string(),
            sig9(*d),
            sig9(point.prob),
            sig9(point.ci_low),
            sig9(point.ci_high),
            sig9(*prob),
        ])?;
    }
    w.flush()?;

    let report = compare_with_analysis(&stats, settings.flow, &curve);
    eprintln!(
        "flow {}: slope ratio {}, max |log10 gap| {}, mean |log10 gap| {}, loss rate {}",
        settings.flow,
        opt(report.slope_ratio),
        opt(report.max_abs_gap()),
        opt(report.mean_abs_gap()),
        sig9(stats.flow(settings.flow).loss_rate())
    );
    if !report.excluded.is_empty() {
        let list: Vec<String> = report.excluded.iter().map(|d| sig9(*d)).collect();
        eprintln!("excluded thresholds (fewer than {} tail events): {}", dasqos::sim::MIN_TAIL_EVENTS, list.join(" "));
    }
    Ok(())
}

pub fn outage<W: Write>(ctx: &Context, out: W) -> CliResult<()> {
    let cfg = &ctx.config;
    let scn = cfg.scenario()?;
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["scope", "antenna", "probability", "std_err", "samples"])?;
    match cfg.fixed_users()? {
        Some(users) => {
            let mut per = Vec::with_capacity(scn.antennas.len());
            for m in 0..scn.antennas.len() {
                let (p, se, n) = if scn.channel.alpha == 1.0 {
                    (antenna_outage_closed_form(&scn, &users, m)?, String::new(), String::new())
                } else {
                    let mc = antenna_outage_mc(&scn, &users, m, ctx.samples, ctx.seed.wrapping_add(m as u64))?;
                    (mc.probability, sig9(mc.std_error), mc.trials.to_string())
                };
                per.push(p);
                w.write_record(["antenna".to_string(), (m + 1).to_string(), sig9(p), se, n])?;
            }
            w.write_record(["system".to_string(), String::new(), sig9(system_outage(&per)), String::new(), String::new()])?;
        }
        None => {
            let e = expected_outage(&scn, ctx.samples, ctx.seed)?;
            warn_fallbacks(e.fallbacks);
            w.write_record(["expected".to_string(), String::new(), sig9(e.mean), sig9(e.std_error), e.samples.to_string()])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Writes the trace, then returns the final layout block.
pub fn optimize<W: Write>(ctx: &Context, out: W) -> CliResult<String> {
    let cfg = &ctx.config;
    let scn = cfg.scenario()?;
    let (rm, trace_every) = cfg.rm_config()?;
    let outcome = rm_optimize(&scn, &scn.antennas, &rm, ctx.seed)?;

    let mut w = csv::Writer::from_writer(out);
    w.write_record(["n", "L1_bar", "theta1_bar", "e_outage_estimate", "e_outage_std_err"])?;
    let last = outcome.trace.len();
    for row in &outcome.trace {
        if !(row.n == 1 || row.n == last || row.n % trace_every == 0 || row.e_outage.is_some()) {
            continue;
        }
        let (r, theta) = outcome.first_antenna(&row.average);
        w.write_record([
            row.n.to_string(),
            sig9(r),
            sig9(theta),
            opt(row.e_outage.map(|e| e.mean)),
            opt(row.e_outage.map(|e| e.std_error)),
        ])?;
    }
    w.flush()?;

    let block = geometry_block(&scn.layout, &outcome.antennas, cfg.fixed_users()?.as_ref(), hex_size(cfg));
    if outcome.skipped_gradients > 0 {
        log::warn!("{} gradient probes were ill-conditioned and skipped", outcome.skipped_gradients);
    }
    if let RmStatus::Diverged { .. } = outcome.status {
        eprintln!("{block}");
        outcome.into_result()?;
    }
    Ok(block)
}

pub fn sweep<W: Write>(ctx: &Context, out: W) -> CliResult<()> {
    let cfg = &ctx.config;
    let base = cfg.scenario()?;
    cfg.circle()?;
    let (radii, alphas) = cfg.sweep()?;
    let alphas = alphas.unwrap_or_else(|| vec![base.channel.alpha]);

    let mut w = csv::Writer::from_writer(out);
    w.write_record(["radius", "e_outage", "std_err", "samples", "alpha", "path_loss_exp", "spacing_d", "argmin"])?;
    for alpha in alphas {
        let scn: CellScenario = base.with_alpha(alpha);
        let result = radius_sweep(&scn, &radii, ctx.samples, ctx.seed)?;
        warn_fallbacks(result.points.iter().map(|p| p.outage.fallbacks).sum());
        for (i, p) in result.points.iter().enumerate() {
            w.write_record([
                sig9(p.radius),
                sig9(p.outage.mean),
                sig9(p.outage.std_error),
                p.outage.samples.to_string(),
                sig9(alpha),
                sig9(scn.channel.path_loss_exponent),
                sig9(scn.layout.spacing()),
                u8::from(i == result.argmin).to_string(),
            ])?;
        }
        log::info!("alpha {alpha}: argmin radius {}", result.best().radius);
    }
    w.flush()?;
    Ok(())
}

pub fn run_to<W: Write>(command: crate::Command, ctx: &Context, out: W, layout_out: Option<&std::path::Path>) -> CliResult<()> {
    match command {
        crate::Command::Delay => delay(ctx, out),
        crate::Command::Outage => outage(ctx, out),
        crate::Command::Sweep => sweep(ctx, out),
        crate::Command::Optimize => {
            let block = optimize(ctx, out)?;
            match layout_out {
                Some(path) => std::fs::write(path, block).map_err(CliError::from),
                None => {
                    eprint!("{block}");
                    Ok(())
                }
            }
        }
    }
}
