//! One PASS/FAIL line per acceptance criterion, at the stated tolerances.
//! Run with `cargo test -p headzoom-cli --test acceptance -- --nocapture`.

#[path = "../../core/tests/oracles/mod.rs"]
mod oracles;

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use futures_util::{SinkExt, StreamExt};
use headzoom::calibration::{normalize_lean, LeanCoordinate};
use headzoom::filtering::{FilterBank, FilterOutcome, GuardConfig};
use headzoom::geometry::{place_plane, raycast_plane, wrap_angle, ImagePlane};
use headzoom::metrics::{hover_time, MetricsOptions};
use headzoom::stats::{cohens_d, paired_t_samples, rm_anova_matrix, EffectBand, BONFERRONI_ALPHA};
use headzoom::synth::MotionScript;
use headzoom::trace::{read_trace, read_views, write_trace, PoseTrace};
use headzoom::trial::{classify, Attempt, HitTest, Outcome, TrialRecord, TrialRules, MAX_ATTEMPTS, TIME_LIMIT_S};
use headzoom::{
    builtin_schedule, CalibrationProfile, Engine, EngineConfig, HeadPose, MetricsReport, Mode, Orientation, Vec3,
    ViewState,
};
use headzoom_cli::protocol::ViewFrame;
use headzoom_cli::serve::{self, ServeOptions};
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

const SCRIPT: &str = include_str!("../../core/tests/fixtures/contracts.motion");

type Verdict = Result<String, String>;
type Criterion = (&'static str, fn() -> Verdict);

macro_rules! ensure {
    ($cond:expr, $($msg:tt)+) => {
        if !$cond {
            return Err(format!($($msg)+));
        }
    };
}

fn v3(p: Vec3) -> oracles::V3 {
    [p.x, p.y, p.z]
}

fn filter_schedule() -> Verdict {
    let started = Instant::now();
    let xs = [0.0, 0.25, 0.5, 0.75, 1.0];
    let r = [1e-4, 1e-4, 1e-4, 0.05005, 0.1];
    let expected = [(Mode::Tilt, [0.01; 5]), (Mode::Parallel, [0.01, 0.01, 0.01, 0.00505, 1e-4])];
    let mut worst: f64 = 0.0;
    for (mode, q) in expected {
        let s = builtin_schedule(mode);
        for (i, &x) in xs.iter().enumerate() {
            let (sq, sr) = s.sample(LeanCoordinate::new(x));
            worst = worst.max((sq - q[i]).abs()).max((sr - r[i]).abs());
        }
    }
    let secs = started.elapsed().as_secs_f64();
    ensure!(worst <= 1e-12, "max deviation {worst:e}");
    ensure!(secs < 1.0, "took {secs:.3} s");
    Ok(format!("max deviation {worst:e}, {secs:.4} s"))
}

fn calibration_anchors() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(650);
    let mut worst: f64 = 0.0;
    for case in 0..1000 {
        let neutral = Vec3::new(rng.random_range(-3.0..3.0), rng.random_range(1.0..2.0), rng.random_range(-3.0..3.0));
        let yaw: f64 = rng.random_range(-PI..PI);
        let (fwd, back) = (rng.random_range(0.05..0.6), rng.random_range(0.05..0.6));
        let profile = CalibrationProfile::with_heading(neutral, yaw, fwd, back).map_err(|e| e.to_string())?;
        let axis = Vec3::new(yaw.sin(), 0.0, yaw.cos());
        let at = |d: f64| normalize_lean(neutral + axis * d, &profile).value();
        for (d, want) in [(-back, 0.0), (0.0, 0.5), (fwd, 1.0)] {
            worst = worst.max((at(d) - want).abs());
        }
        let mut prev = f64::NEG_INFINITY;
        for i in 0..=100 {
            let x = at(-1.5 * back + 1.5 * (fwd + back) * i as f64 / 100.0);
            ensure!(x >= prev, "profile {case} not monotone");
            prev = x;
        }
    }
    ensure!(worst <= 1e-12, "anchor error {worst:e}");
    Ok(format!("1000 profiles monotone, max anchor error {worst:e}"))
}

fn geometry_oracle() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(651);
    let mut worst: f64 = 0.0;
    for case in 0..10_000 {
        let center = [rng.random_range(-5.0..5.0), rng.random_range(-5.0..5.0), rng.random_range(-5.0..5.0)];
        let (yaw, pitch, roll) = (rng.random_range(-PI..PI), rng.random_range(-1.2..1.2), rng.random_range(-PI..PI));
        let (right, up, fwd) = oracles::frame(yaw, pitch, roll);
        let normal = oracles::scale(fwd, -1.0);
        let plane = ImagePlane::new(Vec3::new(center[0], center[1], center[2]), Orientation::new(yaw, pitch, roll));
        let eye = oracles::add(
            oracles::add(center, oracles::scale(normal, rng.random_range(0.3..10.0))),
            oracles::add(oracles::scale(right, rng.random_range(-3.0..3.0)), oracles::scale(up, rng.random_range(-3.0..3.0))),
        );
        let aim = oracles::add(
            center,
            oracles::add(oracles::scale(right, rng.random_range(-1.5..1.5)), oracles::scale(up, rng.random_range(-0.8..0.8))),
        );
        let mut dir = oracles::sub(aim, eye);
        dir = oracles::scale(dir, 1.0 / oracles::norm(dir));
        if case % 10 == 0 {
            dir = oracles::scale(dir, -1.0);
        }
        let want = oracles::march_bisect(eye, dir, center, normal, 100.0);
        let got = raycast_plane(Vec3::new(eye[0], eye[1], eye[2]), Vec3::new(dir[0], dir[1], dir[2]), &plane);
        match (want, got) {
            (None, None) => {}
            (Some(p), Some(hit)) => worst = worst.max(oracles::norm(oracles::sub(v3(hit.point), p))),
            (w, g) => return Err(format!("case {case}: oracle {w:?}, raycast {g:?}")),
        }
    }
    let head = HeadPose::new(0.0, Vec3::new(0.0, 1.6, 0.0), Orientation::default());
    let plane = place_plane(&head).map_err(|e| e.to_string())?;
    let hit = raycast_plane(head.position, Orientation::new(26.57f64.to_radians(), 0.0, 0.0).forward(), &plane)
        .ok_or("edge ray missed")?;
    let edge = (hit.uv.0 - 1.0).abs().max((hit.uv.1 - 0.5).abs());
    ensure!(worst <= 1e-6, "max error {worst:e} m");
    ensure!(edge <= 1e-6, "edge uv {:?}", hit.uv);
    Ok(format!("10000 rays, max error {worst:e} m; 26.57 deg edge uv ({}, {})", hit.uv.0, hit.uv.1))
}

fn run_fixture(mode: Mode) -> Result<(Vec<(ViewState, HeadPose)>, CalibrationProfile), String> {
    let script = MotionScript::parse(SCRIPT).map_err(|e| e.to_string())?;
    let profile = script.profile();
    let mut engine = Engine::new(EngineConfig::with_mode(mode), Some(profile.clone())).map_err(|e| e.to_string())?;
    let mut out = Vec::new();
    for raw in &script.synthesize().samples {
        let view = engine.step(raw).map_err(|e| e.to_string())?.ok_or("sample not accepted")?;
        out.push((view, *engine.filter_bank().last_output().ok_or("no filtered pose")?));
    }
    Ok((out, profile))
}

/// Population variance, shifted by the first value so a constant series is exactly 0.
fn variance(xs: impl Iterator<Item = f64> + Clone) -> f64 {
    let first = xs.clone().next().unwrap_or(0.0);
    let d: Vec<f64> = xs.map(|x| x - first).collect();
    let n = d.len() as f64;
    let mean = d.iter().sum::<f64>() / n;
    d.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n
}

fn mode_contracts() -> Verdict {
    let started = Instant::now();

    let (frames, _) = run_fixture(Mode::Static)?;
    let views: Vec<ViewState> = frames.iter().map(|f| f.0).collect();
    let mut static_var = variance(views.iter().map(|v| v.zoom));
    for field in [
        |v: &ViewState| v.plane.center.x,
        |v: &ViewState| v.plane.center.y,
        |v: &ViewState| v.plane.center.z,
        |v: &ViewState| v.plane.orientation.yaw,
        |v: &ViewState| v.plane.orientation.pitch,
        |v: &ViewState| v.plane.orientation.roll,
    ] {
        static_var += variance(views.iter().map(field));
    }
    ensure!(static_var == 0.0, "static variance {static_var:e}");

    let (frames, profile) = run_fixture(Mode::Parallel)?;
    let o0 = frames[0].0.plane.orientation;
    let n = profile.neutral().position;
    let neutral_yaw = profile.neutral().orientation.yaw;
    let (mut orient_dev, mut zoom_dev): (f64, f64) = (0.0, 0.0);
    for (v, pose) in &frames {
        let o = v.plane.orientation;
        orient_dev = orient_dev.max((o.yaw - o0.yaw).abs()).max((o.pitch - o0.pitch).abs()).max((o.roll - o0.roll).abs());
        let x = oracles::lean(v3(pose.position), v3(n), neutral_yaw, profile.forward_limit(), profile.backward_limit());
        zoom_dev = zoom_dev.max((v.zoom - (1.0 + 7.0 * x)).abs());
    }
    ensure!(orient_dev <= 1e-12, "parallel orientation drift {orient_dev:e}");
    ensure!(zoom_dev <= 1e-9, "parallel zoom deviation {zoom_dev:e}");

    let (frames, _) = run_fixture(Mode::Tilt)?;
    let (mut facing, mut roll_dev): (f64, f64) = (0.0, 0.0);
    for (v, pose) in &frames {
        let c = v3(v.plane.center);
        let (_, _, f) = oracles::frame(v.plane.orientation.yaw, v.plane.orientation.pitch, 0.0);
        let to_head = oracles::sub(v3(pose.position), c);
        let normal = oracles::scale(f, -1.0);
        let cross = [
            normal[1] * to_head[2] - normal[2] * to_head[1],
            normal[2] * to_head[0] - normal[0] * to_head[2],
            normal[0] * to_head[1] - normal[1] * to_head[0],
        ];
        facing = facing.max(oracles::norm(cross).atan2(oracles::dot(normal, to_head)));
        roll_dev = roll_dev.max(wrap_angle(v.plane.orientation.roll - pose.orientation.roll).abs());
    }
    ensure!(facing <= 1e-6, "tilt facing angle {facing:e} rad");
    ensure!(roll_dev <= 1e-9, "tilt roll deviation {roll_dev:e}");

    let secs = started.elapsed().as_secs_f64();
    ensure!(secs < 5.0, "took {secs:.2} s");
    Ok(format!(
        "{} frames; static var 0, parallel drift {orient_dev:e} zoom dev {zoom_dev:e}, tilt facing {facing:e} roll dev {roll_dev:e}, {secs:.2} s",
        frames.len()
    ))
}

fn noisy(seed: u64, n: usize) -> Vec<HeadPose> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0, 0.002).unwrap();
    (0..n)
        .map(|i| {
            let p = Vec3::new(noise.sample(&mut rng), 1.6 + noise.sample(&mut rng), noise.sample(&mut rng));
            HeadPose::new(i as f64 * 1000.0 / 72.0, p, Orientation::default())
        })
        .collect()
}

fn positional_std(poses: &[HeadPose]) -> f64 {
    let n = poses.len() as f64;
    let mean = poses.iter().fold(Vec3::ZERO, |a, p| a + p.position) * (1.0 / n);
    (poses.iter().map(|p| (p.position - mean).dot(p.position - mean)).sum::<f64>() / (3.0 * n)).sqrt()
}

fn filter_at(mode: Mode, x: f64, input: &[HeadPose]) -> Result<Vec<HeadPose>, String> {
    let mut bank = FilterBank::new(builtin_schedule(mode), GuardConfig::default());
    input
        .iter()
        .map(|p| match bank.process(p, LeanCoordinate::new(x)) {
            FilterOutcome::Filtered(f) => Ok(f),
            FilterOutcome::Held => Err("noise sample held by the guard".to_string()),
        })
        .collect()
}

fn jitter_suppression() -> Verdict {
    let input = noisy(653, 720);
    // the first second is covariance warm-up
    let settle = 72;
    let in_std = positional_std(&input[settle..]);
    let mut ratios = Vec::new();
    for mode in [Mode::Parallel, Mode::Tilt] {
        let ratio = positional_std(&filter_at(mode, 0.9, &input)?[settle..]) / in_std;
        ensure!(ratio <= 0.25, "{mode} std ratio {ratio:.4}");
        ratios.push(format!("{mode} {ratio:.4}"));
    }
    let deep = filter_at(Mode::Tilt, 0.95, &input)?;
    let shallow = filter_at(Mode::Tilt, 0.2, &input)?;
    let (vd, vs) = (positional_std(&deep[settle..]).powi(2), positional_std(&shallow[settle..]).powi(2));
    ensure!(vd < vs, "tilt variance at 0.95 ({vd:e}) not below 0.2 ({vs:e})");
    ensure!(filter_at(Mode::Tilt, 0.95, &noisy(653, 720))? == deep, "not deterministic");
    Ok(format!("std ratio at x=0.9: {}; tilt variance 0.95 {vd:.3e} < 0.2 {vs:.3e}; deterministic", ratios.join(", ")))
}

fn random_script(rng: &mut ChaCha8Rng) -> String {
    let mut s = format!(
        "seed {}\nheading {}\nnoise {} {}\nhold 0.3\n",
        rng.random_range(0..1000u64),
        rng.random_range(-180.0..180.0f64),
        rng.random_range(0.0..0.004f64),
        rng.random_range(0.0..0.004f64),
    );
    for _ in 0..rng.random_range(3..8) {
        s += &match rng.random_range(0..5) {
            0 => format!("lean {} {}\n", rng.random_range(0.0..1.0f64), rng.random_range(0.3..2.0f64)),
            1 => format!(
                "ramp {} yaw={} pitch={}\n",
                rng.random_range(0.3..2.0f64),
                rng.random_range(-30.0..30.0f64),
                rng.random_range(-20.0..20.0f64)
            ),
            2 => format!("roll {} {}\n", rng.random_range(-25.0..25.0f64), rng.random_range(0.3..1.5f64)),
            3 => format!(
                "move {} {} {} {}\n",
                rng.random_range(-0.2..0.2f64),
                rng.random_range(-0.1..0.1f64),
                rng.random_range(-0.2..0.2f64),
                rng.random_range(0.5..2.0f64)
            ),
            _ => format!("hold {}\nnan\n", rng.random_range(0.1..0.8f64)),
        };
    }
    s
}

fn metrics_oracles() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(654);
    let opts = MetricsOptions::default();
    let (mut head_dev, mut zoom_dev, mut hover_dev): (f64, f64, f64) = (0.0, 0.0, 0.0);
    for trial_no in 0..100 {
        let script = MotionScript::parse(&random_script(&mut rng)).map_err(|e| e.to_string())?;
        let trace = script.synthesize();
        let mode = Mode::ALL[rng.random_range(0..3)];
        let views = Engine::new(EngineConfig::with_mode(mode), Some(script.profile()))
            .and_then(|mut e| e.run(&trace.samples))
            .map_err(|e| e.to_string())?;
        let mut targets = BTreeMap::new();
        for name in ["wally", "wenda", "odlaw"] {
            let c = views[rng.random_range(0..views.len())].cursor_uv;
            targets.insert(
                name.to_string(),
                ((c.0 + rng.random_range(-0.03..0.03)).clamp(0.0, 1.0), (c.1 + rng.random_range(-0.05..0.05)).clamp(0.0, 1.0)),
            );
        }
        let record = TrialRecord::from_attempts("p", trace, mode, "img", targets, vec![]);
        let report = MetricsReport::compute(&record, &views, &opts).map_err(|e| e.to_string())?;

        let finite: Vec<&HeadPose> = record.trace.samples.iter().filter(|s| s.is_finite()).collect();
        let points: Vec<oracles::V3> = finite.iter().map(|s| v3(s.position)).collect();
        let angles: Vec<(f64, f64)> = finite.iter().map(|s| (s.orientation.yaw, s.orientation.pitch)).collect();
        head_dev = head_dev
            .max((report.total_head_movement - oracles::path_length(&points)).abs())
            .max((report.total_head_rotation - oracles::angular_path(&angles)).abs())
            .max((report.max_lean - oracles::max_abs_lean(&points, angles[0].0)).abs());

        let zooms: Vec<f64> = views.iter().map(|v| v.zoom).collect();
        ensure!(
            report.zoom_change_count == oracles::zoom_legs(&zooms, opts.zoom_epsilon),
            "trial {trial_no}: zoom changes {} vs oracle {}",
            report.zoom_change_count,
            oracles::zoom_legs(&zooms, opts.zoom_epsilon)
        );
        let distance: f64 = zooms.windows(2).map(|w| (w[1] - w[0]).abs()).sum();
        let mean = zooms.iter().sum::<f64>() / zooms.len() as f64;
        let max = zooms.iter().copied().fold(f64::MIN, f64::max);
        zoom_dev = zoom_dev
            .max((report.total_zoom_distance - distance).abs())
            .max((report.avg_zoom - mean).abs())
            .max((report.max_zoom - max).abs());

        let times: Vec<f64> = views.iter().map(|v| v.timestamp_ms).collect();
        let cursors: Vec<(f64, f64)> = views.iter().map(|v| v.cursor_uv).collect();
        for (name, secs) in oracles::hover_grid(&times, &cursors, &record.targets) {
            hover_dev = hover_dev.max((report.hover_time_seconds[&name] - secs).abs());
        }
    }
    ensure!(head_dev <= 1e-9, "head metric deviation {head_dev:e}");
    ensure!(zoom_dev <= 1e-9, "zoom metric deviation {zoom_dev:e}");
    ensure!(hover_dev <= 1.0 / 72.0 + 1e-9, "hover deviation {hover_dev:e} s");

    let hit = HitTest::default();
    let target = (0.5, 0.5);
    let targets = BTreeMap::from([("wally".to_string(), target)]);
    let plane = ImagePlane::new(Vec3::new(0.0, 1.6, 2.0), Orientation::default());
    let at = |t: f64, px: f64| ViewState {
        timestamp_ms: t,
        mode: Mode::Static,
        zoom: 1.0,
        pan_uv: target,
        cursor_uv: (0.5 + px / 2800.0, 0.5),
        lean_x: 0.5,
        plane,
    };
    let near = hover_time(&[at(0.0, 104.0), at(100.0, 104.0)], &targets, &hit)["wally"];
    let far = hover_time(&[at(0.0, 106.0), at(100.0, 106.0)], &targets, &hit)["wally"];
    ensure!(near > 0.0 && far == 0.0, "104 px hover {near}, 106 px hover {far}");
    Ok(format!(
        "100 trials: head dev {head_dev:e}, zoom dev {zoom_dev:e}, hover dev {hover_dev:.4} s; 104 px hit, 106 px miss"
    ))
}

fn trial_rules() -> Verdict {
    let rules = TrialRules::default();
    let a = |t: f64, correct: bool| Attempt { timestamp_ms: t * 1000.0, cursor_uv: (0.5, 0.5), correct };
    ensure!(TIME_LIMIT_S == 120.0 && MAX_ATTEMPTS == 3, "limits {TIME_LIMIT_S} s / {MAX_ATTEMPTS}");
    let cases = [
        (vec![a(20.0, false), a(45.5, true)], (Outcome::Success, 45.5, 2)),
        (vec![a(10.0, false), a(30.0, false), a(50.0, false), a(60.0, true)], (Outcome::FailedAttempts, 50.0, 3)),
        (vec![a(30.0, false), a(120.5, true)], (Outcome::Timeout, 120.0, 1)),
        (vec![], (Outcome::Timeout, 120.0, 0)),
    ];
    for (attempts, want) in cases {
        let got = classify(&attempts, 0.0, &rules);
        ensure!(got == want, "{attempts:?}: got {got:?}, want {want:?}");
    }
    Ok("Success, FailedAttempts and Timeout fixtures classify correctly; 120 s, 3 attempts".into())
}

fn stats_oracles() -> Verdict {
    let data = vec![
        vec![45.0, 50.0, 55.0],
        vec![42.0, 42.0, 45.0],
        vec![36.0, 41.0, 43.0],
        vec![39.0, 35.0, 40.0],
        vec![51.0, 55.0, 59.0],
        vec![44.0, 49.0, 56.0],
    ];
    let a = rm_anova_matrix(&data).map_err(|e| e.to_string())?;
    let o = oracles::sums_of_squares(&data);
    let ss_dev = (a.ss_conditions - o.conditions)
        .abs()
        .max((a.ss_subjects - o.subjects).abs())
        .max((a.ss_error - o.error).abs());
    let f = (o.conditions / 2.0) / (o.error / 10.0);
    ensure!(ss_dev <= 1e-6 && (a.f_statistic - f).abs() <= 1e-6, "SS deviation {ss_dev:e}, F {}", a.f_statistic);

    let mut p_dev: f64 = 0.0;
    for (seed, effect) in [(31u64, 0.45), (62, 0.2), (93, 0.7)] {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let noise = Normal::new(0.0, 1.0).unwrap();
        let b: Vec<f64> = (0..31).map(|_| 10.0 + 2.0 * noise.sample(&mut rng)).collect();
        let a: Vec<f64> = b.iter().map(|x| x + effect + noise.sample(&mut rng)).collect();
        let t = paired_t_samples(&a, &b, BONFERRONI_ALPHA).map_err(|e| e.to_string())?;
        let diffs: Vec<f64> = a.iter().zip(&b).map(|(x, y)| x - y).collect();
        p_dev = p_dev.max((t.p_value - oracles::sign_flip_p(&diffs, 100_000, seed + 1)).abs());
    }
    ensure!(p_dev <= 0.02, "paired t vs permutation p deviation {p_dev}");

    let bands = [
        (0.1999, EffectBand::Negligible),
        (0.2, EffectBand::Small),
        (0.4999, EffectBand::Small),
        (0.5, EffectBand::Medium),
        (0.7999, EffectBand::Medium),
        (0.8, EffectBand::Large),
    ];
    for (d, band) in bands {
        ensure!(EffectBand::of(d) == band, "d = {d} gave {:?}", EffectBand::of(d));
    }
    let (d, band) = cohens_d(&[0.0, 0.0, 0.0, 2.0], &[0.0; 4]).map_err(|e| e.to_string())?;
    ensure!(d == 0.5 && band == EffectBand::Medium, "d = {d} band {band:?}");
    ensure!(BONFERRONI_ALPHA == 0.05 / 3.0, "Bonferroni alpha {BONFERRONI_ALPHA}");
    Ok(format!("SS dev {ss_dev:e}, p = {:.6}; max |p_t - p_perm| {p_dev:.4}; bands and 0.05/3 exact", a.p_value))
}

fn replay_cli(trace: &Path, profile: &Path, out: &Path) -> Result<(), String> {
    let o = Command::new(env!("CARGO_BIN_EXE_headzoom"))
        .args(["replay", trace.to_str().unwrap(), "--profile", profile.to_str().unwrap(), "--mode", "tilt", "-o"])
        .arg(out)
        .env_remove("HEADZOOM_CONFIG")
        .output()
        .map_err(|e| e.to_string())?;
    ensure!(o.status.success(), "replay failed: {}", String::from_utf8_lossy(&o.stderr));
    Ok(())
}

/// Streams every sample over the socket, waiting for each VIEW before the next POSE.
async fn stream_live(trace: &PoseTrace, profile: CalibrationProfile) -> Result<Vec<ViewFrame>, String> {
    let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.map_err(|e| e.to_string())?;
    let addr = listener.local_addr().map_err(|e| e.to_string())?;
    let opts = ServeOptions { config: EngineConfig::with_mode(Mode::Tilt), profile: Some(profile) };
    tokio::spawn(serve::run(listener, opts));
    let (mut ws, _) = tokio_tungstenite::connect_async(format!("ws://{addr}")).await.map_err(|e| e.to_string())?;
    let mut frames = Vec::with_capacity(trace.len());
    for s in &trace.samples {
        let (p, o) = (s.position, s.orientation);
        let line = format!("POSE {} {} {} {} {} {} {}", s.timestamp_ms, p.x, p.y, p.z, o.yaw, o.pitch, o.roll);
        ws.send(line.into()).await.map_err(|e| e.to_string())?;
        let reply = loop {
            let msg = tokio::time::timeout(Duration::from_secs(5), ws.next())
                .await
                .map_err(|_| "no reply within 5 s")?
                .ok_or("connection closed")?
                .map_err(|e| e.to_string())?;
            if let Ok(text) = msg.to_text() {
                if text.starts_with("VIEW") {
                    break text.to_string();
                }
                ensure!(!text.starts_with("ERROR"), "server error: {text}");
            }
        };
        frames.push(ViewFrame::parse(&reply).map_err(|e| e.to_string())?);
    }
    Ok(frames)
}

fn end_to_end_determinism() -> Verdict {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let script = MotionScript::parse(SCRIPT).map_err(|e| e.to_string())?;
    let trace_path = dir.path().join("trace.tsv");
    let profile_path = dir.path().join("profile.txt");
    write_trace(&trace_path, &script.synthesize()).map_err(|e| e.to_string())?;
    script.profile().save(&profile_path).map_err(|e| e.to_string())?;
    let (a, b) = (dir.path().join("a.tsv"), dir.path().join("b.tsv"));
    replay_cli(&trace_path, &profile_path, &a)?;
    replay_cli(&trace_path, &profile_path, &b)?;
    let bytes = std::fs::read(&a).map_err(|e| e.to_string())?;
    ensure!(bytes == std::fs::read(&b).map_err(|e| e.to_string())?, "replay outputs differ");

    let batch = read_views(&a).map_err(|e| e.to_string())?;
    let trace = read_trace(&trace_path).map_err(|e| e.to_string())?;
    let profile = CalibrationProfile::load(&profile_path).map_err(|e| e.to_string())?;
    let rt = tokio::runtime::Runtime::new().map_err(|e| e.to_string())?;
    let live = rt.block_on(stream_live(&trace, profile))?;
    ensure!(live.len() == batch.len(), "live {} views, batch {}", live.len(), batch.len());
    for (i, (l, b)) in live.iter().zip(&batch).enumerate() {
        ensure!(l.same_view(&ViewFrame::of(b)), "frame {i} differs: live {l:?} batch {b:?}");
    }
    Ok(format!("replay byte-identical ({} bytes); {} live frames equal batch", bytes.len(), live.len()))
}

#[test]
fn acceptance() {
    let criteria: [Criterion; 9] = [
        ("filter schedule fidelity", filter_schedule),
        ("calibration anchors", calibration_anchors),
        ("geometry oracle", geometry_oracle),
        ("mode contracts", mode_contracts),
        ("jitter suppression", jitter_suppression),
        ("metrics oracles", metrics_oracles),
        ("trial rules", trial_rules),
        ("stats oracles", stats_oracles),
        ("end-to-end determinism", end_to_end_determinism),
    ];
    let mut failed = Vec::new();
    for (i, (name, check)) in criteria.iter().enumerate() {
        match check() {
            Ok(detail) => println!("PASS {}. {name}: {detail}", i + 1),
            Err(detail) => {
                println!("FAIL {}. {name}: {detail}", i + 1);
                failed.push(*name);
            }
        }
    }
    assert!(failed.is_empty(), "failed: {failed:?}");
}
