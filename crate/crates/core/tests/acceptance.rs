//! Acceptance run: one PASS/FAIL line per criterion, non-zero exit on any
//! failure.
//!
//! `cargo test --release --test acceptance`

mod common;

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::ExitCode;
use std::sync::OnceLock;
use std::time::{Duration, Instant};

use common::metric_cases;
use common::{gradient_check, min_pair_distance, safe_scene, unit};
use glam::DVec3;
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use swarmflow::autodiff::Tensor;
use swarmflow::diffusion::{ddpm_sample, ddpm_train_loss, train_ddpm, DdpmDraws, DiffusionSchedule};
use swarmflow::flowmatch::{cfm_loss, train_with, CfmDraws, Cfm, FlowSchedule, TrainConfig};
use swarmflow::io::trajectory::format_csv;
use swarmflow::io::{from_points, make_synthetic_dataset, normalize, to_points, to_real_scale, Checkpoint, SceneScale, ShapeKind};
use swarmflow::metrics::{
    chamfer, collision_rates, cov_mmd, distance_traveled, smoothness, MetricsReport,
};
use swarmflow::models::{standard_normal, CouplingInit, ModelConfig, SwarmModel};
use swarmflow::navigation::{orca_adjust, NavConfig};
use swarmflow::sampling::{integrate_exact_target, sample, sample_cfm_plus_orca, SampleConfig, TrajectoryLog};

/// Upper bound on the fixture's final Chamfer distance. The independent
/// re-implementation in `tests/oracles/fixture_train.py` scored 0.073 to
/// 0.108 over three training seeds and three draws each; untrained output
/// scores about 0.58 and a fresh sample of the sphere itself about 0.044.
const FIXTURE_CD: f64 = 0.12;

type Check = fn() -> Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

// 1 -------------------------------------------------------------------------

fn perturbed_model(seed: u64) -> SwarmModel {
    let mut model = SwarmModel::with_init(ModelConfig::tiny(8), seed, CouplingInit::Identity).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    for t in model.params.tensors_mut() {
        let noise = Tensor::from_fn(t.shape(), |_| rng.random_range(-0.1..0.1));
        *t = t.zip_map(&noise, |v, n| v + n);
    }
    model
}

fn gradients() -> Result<String, String> {
    let clock = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let x0 = Tensor::from_fn(&[16, 3], |_| rng.random_range(-1.5..1.5));

    let model = perturbed_model(11);
    let draws = CfmDraws::sample(&mut rng, 16, 8, 1.0);
    let sched = FlowSchedule::default();
    let flow = gradient_check(&model.params, &|g, p| cfm_loss(&model, &sched, g, p, &x0, &draws).unwrap().total);
    ensure(flow.checked + flow.skipped == model.params.num_scalars(), || format!("flow: {flow:?}"))?;

    let model = perturbed_model(12);
    let dsched = DiffusionSchedule::linear(100, 1e-4, 0.02).unwrap();
    let ddraws = DdpmDraws::sample(&mut rng, 16, 8, 100);
    let diff = gradient_check(&model.params, &|g, p| {
        ddpm_train_loss(&model, &dsched, g, p, &x0, &ddraws).unwrap().total
    });

    let worst = flow.max_rel.max(diff.max_rel);
    let elapsed = clock.elapsed();
    ensure(worst < 1e-4, || format!("max relative error {worst:.3e}; flow {flow:?}; diffusion {diff:?}"))?;
    ensure(flow.skipped * 50 < flow.checked && diff.skipped * 50 < diff.checked, || {
        format!("too many coordinates skipped at kinks: {} / {}", flow.skipped, diff.skipped)
    })?;
    ensure(elapsed < Duration::from_secs(60), || format!("took {elapsed:.1?}"))?;
    Ok(format!(
        "max rel err {worst:.2e} over {} scalars ({elapsed:.1?})",
        flow.checked + diff.checked
    ))
}

// 2 -------------------------------------------------------------------------

fn flow_identities() -> Result<String, String> {
    let s = FlowSchedule::default();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for _ in 0..100 {
        let (x0, eps) = (standard_normal(&mut rng, &[16, 3]), standard_normal(&mut rng, &[16, 3]));
        let end = s.sample_path_point(&x0, s.horizon, &eps).unwrap();
        ensure(end == eps, || "x_T differs from the noise".into())?;
        let start = s.sample_path_point(&x0, 0.0, &eps).unwrap();
        let gap = start.zip_map(&x0, |a, b| a - b).max_abs();
        ensure(gap <= s.sigma_min * eps.max_abs() * (1.0 + 1e-12), || format!("x_0 off by {gap:e}"))?;
    }
    let mut worst: f64 = 0.0;
    for _ in 0..10_000 {
        let (x0, eps) = (standard_normal(&mut rng, &[1, 3]), standard_normal(&mut rng, &[1, 3]));
        let t = rng.random_range(0.0..s.horizon);
        let x = s.sample_path_point(&x0, t, &eps).unwrap();
        let a = s.conditional_field(&x, &x0, t).unwrap();
        worst = worst.max(a.zip_map(&s.target_field(&x0, &eps), |p, q| p - q).max_abs());
    }
    ensure(worst < 1e-10, || format!("on-path field differs by {worst:e}"))?;
    Ok(format!("endpoints exact; on-path max diff {worst:.1e} over 10^4 draws"))
}

// 3 -------------------------------------------------------------------------

fn exact_integration() -> Result<String, String> {
    let s = FlowSchedule::default();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let start = to_points(&standard_normal(&mut rng, &[256, 3]));
    let target = to_points(&standard_normal(&mut rng, &[256, 3]));
    let log = integrate_exact_target(&start, &target, &s, 1000).unwrap();
    let terminal = log
        .current()
        .iter()
        .zip(&target)
        .map(|(p, q)| (*p - *q).abs().max_element())
        .fold(0.0, f64::max);
    let mut straight: f64 = 0.0;
    for i in 0..log.agents() {
        let a = log.positions[0][i];
        let chord = log.current()[i] - a;
        for frame in &log.positions {
            let p = frame[i] - a;
            let off = p - chord * (p.dot(chord) / chord.length_squared());
            straight = straight.max(off.length() / chord.length());
        }
    }
    ensure(terminal < 1e-3, || format!("terminal error {terminal:e}"))?;
    ensure(straight < 1e-6, || format!("straightness {straight:e}"))?;
    Ok(format!("terminal inf-err {terminal:.1e}, straightness {straight:.1e}"))
}

// 4 -------------------------------------------------------------------------

fn bijector() -> Result<String, String> {
    let model = SwarmModel::with_init(ModelConfig::default(), 4, CouplingInit::Random).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut round: f64 = 0.0;
    for _ in 0..100 {
        let w = standard_normal(&mut rng, &[1, model.latent_dim()]);
        let (z, ld) = model.bijector_forward(&w).unwrap();
        let (back, ld_inv) = model.bijector_inverse(&z).unwrap();
        round = round.max(back.zip_map(&w, |a, b| a - b).max_abs());
        ensure((ld + ld_inv).abs() < 1e-9 * ld.abs().max(1.0), || format!("log-dets {ld} and {ld_inv}"))?;
    }
    ensure(round < 1e-6, || format!("round trip error {round:e}"))?;

    let small = SwarmModel::with_init(ModelConfig::tiny(4), 5, CouplingInit::Random).unwrap();
    let mut worst: f64 = 0.0;
    for _ in 0..20 {
        let w = standard_normal(&mut rng, &[1, 4]);
        let (_, ld) = small.bijector_forward(&w).unwrap();
        let h = 1e-5;
        let jac = DMatrix::from_fn(4, 4, |i, j| {
            let shift = |sign: f64| {
                let moved = Tensor::from_fn(&[1, 4], |k| w.data()[k] + if k == j { sign * h } else { 0.0 });
                small.bijector_forward(&moved).unwrap().0.data()[i]
            };
            (shift(1.0) - shift(-1.0)) / (2.0 * h)
        });
        let numeric = jac.determinant().abs().ln();
        worst = worst.max((numeric - ld).abs() / ld.abs().max(numeric.abs()).max(1e-5));
    }
    ensure(worst < 1e-4, || format!("log-det relative error {worst:e}"))?;
    Ok(format!("round trip {round:.1e} (d=256); log-det rel err {worst:.1e} (d=4)"))
}

// 5 -------------------------------------------------------------------------

const KAPPA: f64 = 0.06;

fn orca_safety() -> Result<String, String> {
    let clock = Instant::now();
    let start = [DVec3::new(-0.5, 0.0, 0.0), DVec3::new(0.5, 0.0, 0.0)];
    let goals = [start[1], start[0]];
    let mut head_on = f64::INFINITY;
    for steps in [5, 25, 100, 400] {
        let log = sample_cfm_plus_orca(&goals, &start, 1.0, &SampleConfig::new(2, steps, KAPPA, 0)).unwrap();
        head_on = log.positions.iter().map(|f| min_pair_distance(f)).fold(head_on, f64::min);
    }
    ensure(head_on >= KAPPA * (1.0 - 1e-6), || format!("head-on pair reached {head_on}"))?;

    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut closest = f64::INFINITY;
    for scene in 0..100 {
        let x = safe_scene(&mut rng, 32, 0.3, KAPPA);
        let centre = x.iter().copied().sum::<DVec3>() / 32.0;
        let speed = rng.random_range(0.5..8.0);
        let pref: Vec<DVec3> = x
            .iter()
            .map(|p| (unit(&mut rng) + (centre - *p).normalize_or_zero() * 2.0) * speed)
            .collect();
        let dt = [0.01, 0.04, 0.2][scene % 3];
        let v = orca_adjust(&pref, &x, &NavConfig::new(KAPPA, dt));
        let next: Vec<DVec3> = x.iter().zip(&v).map(|(p, v)| *p + *v * dt).collect();
        closest = closest.min(min_pair_distance(&next));
    }
    ensure(closest >= KAPPA * (1.0 - 1e-6), || format!("random scene reached {closest}"))?;
    let elapsed = clock.elapsed();
    ensure(elapsed < Duration::from_secs(120), || format!("took {elapsed:.1?}"))?;
    Ok(format!("head-on min {head_on:.6}, random scenes min {closest:.6} (kappa {KAPPA}, {elapsed:.1?})"))
}

// 6-8 -----------------------------------------------------------------------

struct Fixture {
    shape: Vec<DVec3>,
    cfm: Checkpoint,
    ddpm: Checkpoint,
    train_time: Duration,
}

const AGENTS: usize = 512;

fn fixture() -> &'static Fixture {
    static CELL: OnceLock<Fixture> = OnceLock::new();
    CELL.get_or_init(|| {
        let raw = make_synthetic_dataset(ShapeKind::Sphere, 512, 1, 0).unwrap();
        let (shape, _) = normalize(&raw[0]).unwrap();
        let config = TrainConfig::single_shape();
        let clock = Instant::now();
        let cfm = train_with(&[from_points(&shape)], &config, &Cfm, |_| {}).unwrap();
        let train_time = clock.elapsed();
        let ddpm = train_ddpm(&[from_points(&shape)], &config, |_| {}).unwrap();
        Fixture {
            shape,
            cfm,
            ddpm,
            train_time,
        }
    })
}

fn gen_swarms(steps: usize) -> TrajectoryLog {
    let f = fixture();
    sample(&f.cfm, &SampleConfig::new(AGENTS, steps, f.cfm.config.kappa, 1)).unwrap()
}

/// Metrics at the real 200 m scene scale.
fn real_metrics(log: &TrajectoryLog) -> MetricsReport {
    MetricsReport::evaluate(&[to_real_scale(log, &SceneScale::default())], None).unwrap()
}

fn end_to_end() -> Result<String, String> {
    let f = fixture();
    let log = gen_swarms(100);
    let (_, fin) = collision_rates(&log, f.cfm.config.kappa);
    let cd = chamfer(log.current(), &f.shape).unwrap();
    ensure(f.train_time < Duration::from_secs(30 * 60), || format!("training took {:.1?}", f.train_time))?;
    ensure(fin == 0.0, || format!("FIN {fin}"))?;
    ensure(cd < FIXTURE_CD, || format!("CD {cd:.4} not below {FIXTURE_CD}"))?;
    Ok(format!("FIN 0, CD {cd:.4} < {FIXTURE_CD} (trained in {:.0?})", f.train_time))
}

fn step_sweep() -> Result<String, String> {
    let runs: Vec<(usize, MetricsReport)> = [5, 25, 100].iter().map(|&n| (n, real_metrics(&gen_swarms(n)))).collect();
    let line = runs
        .iter()
        .map(|(n, r)| format!("{n}: FIN {:.2} ACC {:.3e} JERK {:.3e}", r.fin_coll_pct, r.acc, r.jerk))
        .collect::<Vec<_>>()
        .join("; ");
    for w in runs.windows(2) {
        let (a, b) = (&w[0].1, &w[1].1);
        ensure(b.fin_coll_pct <= a.fin_coll_pct && b.acc <= a.acc && b.jerk <= a.jerk, || line.clone())?;
    }
    Ok(line)
}

fn baselines() -> Result<String, String> {
    let f = fixture();
    let ours = real_metrics(&gen_swarms(100));
    let diffusion = real_metrics(&ddpm_sample(&f.ddpm, AGENTS, 1).unwrap());
    let mut plain = SampleConfig::new(AGENTS, 100, f.cfm.config.kappa, 1);
    plain.use_orca = false;
    let cfm_only = real_metrics(&sample(&f.cfm, &plain).unwrap());
    let summary = format!(
        "diffusion/ours ACC {:.3}/{:.3} JERK {:.3}/{:.4} DIR {:.3}/{:.3} DIST {:.1}/{:.1}; FIN cfm {:.2} ours {:.2}",
        diffusion.acc, ours.acc, diffusion.jerk, ours.jerk, diffusion.dir, ours.dir, diffusion.dist, ours.dist,
        cfm_only.fin_coll_pct, ours.fin_coll_pct
    );
    let higher = diffusion.acc > ours.acc
        && diffusion.jerk > ours.jerk
        && diffusion.dir > ours.dir
        && diffusion.dist > ours.dist;
    ensure(higher && cfm_only.fin_coll_pct > 0.0 && ours.fin_coll_pct == 0.0, || summary.clone())?;
    Ok(summary)
}

// 9 -------------------------------------------------------------------------

fn metric_oracles() -> Result<String, String> {
    use metric_cases::*;
    let rel = |got: f64, want: f64| (got - want).abs() / want.abs().max(1.0);
    let generated: Vec<_> = (0..4).map(|k| cloud(30, 0.5 + 0.2 * k as f64, 0.3 * k as f64, 0.8)).collect();
    let reference: Vec<_> = (0..3).map(|j| cloud(25, 0.6 + 0.25 * j as f64, -0.2 * j as f64, 0.8)).collect();
    let (cov, mmd) = cov_mmd(&generated, &reference).unwrap();
    let log = oracle_log();
    let (traj, fin) = collision_rates(&log, 0.3);
    let s = smoothness(&log);
    let errors = [
        ("CD", rel(chamfer(&cloud(40, 0.9, 0.1, 0.8), &cloud(57, 1.3, -0.4, 0.8)).unwrap(), CHAMFER)),
        ("COV", rel(cov, COV)),
        ("MMD", rel(mmd, MMD)),
        ("TRAJ", rel(traj, TRAJ)),
        ("FIN", rel(fin, FIN)),
        ("ACC", rel(s.acc, ACC)),
        ("JERK", rel(s.jerk, JERK)),
        ("DIR", rel(s.dir, DIR)),
    ];
    let dist = rel(distance_traveled(&log), DIST);
    let worst = errors.iter().map(|e| e.1).fold(0.0, f64::max);
    for (name, e) in errors {
        ensure(e < 1e-10, || format!("{name} off by {e:e}"))?;
    }
    ensure(dist < 1e-12, || format!("DIST off by {dist:e}"))?;
    Ok(format!("max rel err {worst:.1e}, DIST {dist:.1e}"))
}

// 10 ------------------------------------------------------------------------

fn determinism() -> Result<String, String> {
    let raw = make_synthetic_dataset(ShapeKind::Torus, 128, 2, 9).unwrap();
    let data: Vec<Tensor> = raw.iter().map(|c| from_points(&normalize(c).unwrap().0)).collect();
    let config = TrainConfig {
        model: ModelConfig {
            latent_dim: 8,
            ..ModelConfig::tiny(8)
        },
        steps: 40,
        seed: 21,
        ..TrainConfig::single_shape()
    };
    let run = || {
        let cfm = train_with(&data, &config, &Cfm, |_| {}).unwrap();
        let ddpm = train_ddpm(&data, &config, |_| {}).unwrap();
        let log = sample(&cfm, &SampleConfig::new(64, 20, config.kappa, 3)).unwrap();
        let dlog = ddpm_sample(&ddpm, 64, 3).unwrap();
        [cfm.to_bytes(), ddpm.to_bytes(), format_csv(&log).into_bytes(), format_csv(&dlog).into_bytes()]
    };
    let (a, b) = (run(), run());
    let names = ["flow checkpoint", "diffusion checkpoint", "flow CSV", "diffusion CSV"];
    for ((x, y), name) in a.iter().zip(&b).zip(names) {
        ensure(!x.is_empty() && x == y, || format!("{name} differs between runs"))?;
    }
    Ok(format!("{} bytes compared across two runs", a.iter().map(Vec::len).sum::<usize>()))
}

fn main() -> ExitCode {
    let criteria: [(&str, Check); 10] = [
        ("gradient checks", gradients),
        ("flow identities", flow_identities),
        ("exact-field integration", exact_integration),
        ("bijector", bijector),
        ("ORCA safety", orca_safety),
        ("end-to-end fixture", end_to_end),
        ("step sweep trend", step_sweep),
        ("baseline ordering", baselines),
        ("metric oracles", metric_oracles),
        ("determinism", determinism),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let outcome = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        match outcome {
            Ok(detail) => println!("PASS {:>2} {name}: {detail}", i + 1),
            Err(detail) => {
                failed += 1;
                println!("FAIL {:>2} {name}: {detail}", i + 1);
            }
        }
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failed} criterion(s) failed");
        ExitCode::FAILURE
    }
}
