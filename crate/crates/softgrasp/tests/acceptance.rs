#![allow(clippy::needless_range_loop)]

//! Acceptance suite: one test per release criterion, each printing its
//! pass/fail line (visible with `--nocapture`). Thresholds are pinned
//! here, not configurable.
//!
//! The heavy scenarios (full sweep, benchmark, determinism replays) share
//! a lock so wall-clock measurements are not distorted by each other.

use std::path::Path;
use std::sync::{Mutex, OnceLock};
use std::time::Instant;

use softgrasp::bench::{run_bench, BenchConfig};
use softgrasp::experiment::{
    run_experiment1, run_experiment2, Exp1Gates, ExperimentConfig, GATE_RATE, SETTLE_LIMIT_S,
};
use softgrasp::objects;
use softgrasp_core::geometry::{solve_goal, PlanarOffset, Pose};
use softgrasp_core::rng::SplitMix64;
use softgrasp_core::ssim::{deformation, is_contact, ssim, SsimParams};
use softgrasp_core::{ControllerConfig, TactileImage};

static HEAVY: Mutex<()> = Mutex::new(());

fn report(criterion: u32, name: &str, pass: bool, detail: &str) {
    println!(
        "acceptance criterion {criterion:2} ({name}): {} - {detail}",
        if pass { "PASS" } else { "FAIL" }
    );
    assert!(pass, "criterion {criterion} ({name}) failed: {detail}");
}

// -------------------------------------------------------------------------
// Criterion 1: SSIM oracle equivalence on 100 random pairs within 1e-9,
// in under 5 seconds.
// -------------------------------------------------------------------------

/// Brute-force scalar-loop oracle, independent of the summed-area route.
fn oracle_ssim(a: &TactileImage, b: &TactileImage, p: &SsimParams) -> f64 {
    let k = p.kernel_size;
    let n = (k * k) as f64;
    let mut total = 0.0;
    let mut windows = 0usize;
    for y0 in 0..=(a.height() - k) {
        for x0 in 0..=(a.width() - k) {
            let wx = a.block(x0, y0, k);
            let wy = b.block(x0, y0, k);
            let mu_x: f64 = wx.iter().sum::<f64>() / n;
            let mu_y: f64 = wy.iter().sum::<f64>() / n;
            let mut var_x = 0.0;
            let mut var_y = 0.0;
            let mut cov = 0.0;
            for i in 0..wx.len() {
                var_x += (wx[i] - mu_x) * (wx[i] - mu_x);
                var_y += (wy[i] - mu_y) * (wy[i] - mu_y);
                cov += (wx[i] - mu_x) * (wy[i] - mu_y);
            }
            total += ((2.0 * mu_x * mu_y + p.c1) * (2.0 * (cov / n) + p.c2))
                / ((mu_x * mu_x + mu_y * mu_y + p.c1) * (var_x / n + var_y / n + p.c2));
            windows += 1;
        }
    }
    (total / windows as f64).clamp(0.0, 1.0)
}

fn seeded_image(rng: &mut SplitMix64, w: usize, h: usize) -> TactileImage {
    let pixels = (0..w * h).map(|_| (rng.next_u64() % 256) as f64).collect();
    TactileImage::new(w, h, pixels).unwrap()
}

#[test]
fn criterion_01_ssim_oracle_equivalence() {
    let p = SsimParams::default();
    let mut rng = SplitMix64::new(0xacce97);
    let started = Instant::now();
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let w = 8 + (rng.next_below(57)) as usize; // 8..=64
        let h = 8 + (rng.next_below(57)) as usize;
        let a = seeded_image(&mut rng, w, h);
        let b = seeded_image(&mut rng, w, h);
        let lib = ssim(&a, &b, &p).unwrap();
        let reference = oracle_ssim(&a, &b, &p);
        worst = worst.max((lib - reference).abs());
    }
    let elapsed = started.elapsed().as_secs_f64();
    report(
        1,
        "ssim oracle equivalence",
        worst < 1e-9 && elapsed < 5.0,
        &format!("100 pairs, worst |lib-oracle| = {worst:.2e}, {elapsed:.2} s"),
    );
}

// -------------------------------------------------------------------------
// Criterion 2: identity and range on 50 seeded images within 1e-12.
// -------------------------------------------------------------------------

#[test]
fn criterion_02_identity_and_range() {
    let p = SsimParams::default();
    let mut rng = SplitMix64::new(0x1de9);
    let mut worst_identity: f64 = 0.0;
    let mut in_range = true;
    for _ in 0..50 {
        let w = 8 + (rng.next_below(40)) as usize;
        let h = 8 + (rng.next_below(40)) as usize;
        let img = seeded_image(&mut rng, w, h);
        let s = ssim(&img, &img, &p).unwrap();
        let d = deformation(&img, &img, &p).unwrap();
        worst_identity = worst_identity.max((s - 1.0).abs()).max(d.abs());

        let other = seeded_image(&mut rng, w, h);
        let s = ssim(&img, &other, &p).unwrap();
        let d = deformation(&img, &other, &p).unwrap();
        in_range &= (0.0..=1.0).contains(&s) && (0.0..=1.0).contains(&d);
    }
    report(
        2,
        "identity and range",
        worst_identity < 1e-12 && in_range,
        &format!("50 images, worst identity error {worst_identity:.2e}, all outputs in [0,1]"),
    );
}

// -------------------------------------------------------------------------
// Criterion 3: strict contact threshold.
// -------------------------------------------------------------------------

#[test]
fn criterion_03_contact_threshold_strict() {
    let pass = !is_contact(0.0500, 0.05) && is_contact(0.0501, 0.05) && !is_contact(0.0, 0.05);
    report(3, "contact threshold", pass, "0.0500 -> false, 0.0501 -> true");
}

// -------------------------------------------------------------------------
// Criterion 4: control frequency and capture decoupling.
// -------------------------------------------------------------------------

#[test]
fn criterion_04_control_frequency_and_decoupling() {
    let _guard = HEAVY.lock().unwrap();
    let dir = tempfile::tempdir().unwrap();
    let mut config = BenchConfig::new(dir.path().to_path_buf());
    config.duration_s = 10.0;
    let bench = run_bench(&config).expect("benchmark runs");
    let delta = bench.rate_delta_pct.expect("local mode measures decoupling");
    let pass = bench.tick_rate_hz >= 286.0 && delta < 10.0;
    report(
        4,
        "control frequency",
        pass,
        &format!(
            "{:.0} ticks/s over 10 s (>= 286), rate change {:.1}% with doubled capture (< 10%)",
            bench.tick_rate_hz, delta
        ),
    );
}

// -------------------------------------------------------------------------
// Criteria 5-7 share one full 43x5 sweep.
// -------------------------------------------------------------------------

struct Sweep {
    gates: Exp1Gates,
    wall_s: f64,
    // Keeps the output directory alive for the duration of the suite.
    _dir: tempfile::TempDir,
}

fn full_sweep() -> &'static Sweep {
    static SWEEP: OnceLock<Sweep> = OnceLock::new();
    SWEEP.get_or_init(|| {
        let _guard = HEAVY.lock().unwrap();
        let dir = tempfile::tempdir().unwrap();
        let mut config = ExperimentConfig::new(dir.path().to_path_buf());
        config.trials_per_object = 5;
        config.base_seed = 1;
        config.emit_plots = false;
        let started = Instant::now();
        let report = run_experiment1(&config).expect("full sweep runs");
        let wall_s = started.elapsed().as_secs_f64();
        assert_eq!(report.trials.len(), 43 * 5);
        Sweep { gates: report.gates, wall_s, _dir: dir }
    })
}

#[test]
fn criterion_05_settling_rate_and_wall_clock() {
    let sweep = full_sweep();
    let g = &sweep.gates;
    let pass = g.settle_rate() >= GATE_RATE && sweep.wall_s < 300.0;
    report(
        5,
        "settling",
        pass,
        &format!(
            "{}/{} trials settled within {SETTLE_LIMIT_S} s of first contact ({:.1}%), sweep took {:.0} s (< 300 s)",
            g.settled_in_time,
            g.total_trials,
            g.settle_rate() * 100.0,
            sweep.wall_s
        ),
    );
}

#[test]
fn criterion_06_gentle_grasp_current() {
    let g = &full_sweep().gates;
    let pass = g.pmc_rate() >= GATE_RATE && g.soft_mean_pmc < g.rigid_mean_pmc;
    report(
        6,
        "gentle-grasp current",
        pass,
        &format!(
            "{}/{} trials below 350 mA ({:.1}%), soft mean {:.1} mA < rigid mean {:.1} mA",
            g.pmc_below_threshold,
            g.total_trials,
            g.pmc_rate() * 100.0,
            g.soft_mean_pmc,
            g.rigid_mean_pmc
        ),
    );
}

#[test]
fn criterion_07_bumpless_switching() {
    let g = &full_sweep().gates;
    let bound = ControllerConfig::default().slew_bound;
    let pass = g.bumpless_violations == 0;
    report(
        7,
        "bumpless switching",
        pass,
        &format!(
            "0 of {} trials exceeded the slew bound at a mode switch (max jump {:.2} <= {:.2})",
            g.total_trials, g.max_transition_jump, bound
        ),
    );
}

// -------------------------------------------------------------------------
// Criterion 8: goal-vector correctness against the 4x4 matrix oracle.
// -------------------------------------------------------------------------

type Mat4 = [[f64; 4]; 4];

fn mat4_from_pose(p: &Pose) -> Mat4 {
    let mut m = [[0.0; 4]; 4];
    m[3][3] = 1.0;
    for i in 0..3 {
        for j in 0..3 {
            m[i][j] = p.rotation[i][j];
        }
        m[i][3] = p.translation[i];
    }
    m
}

fn mat4_mul(a: &Mat4, b: &Mat4) -> Mat4 {
    let mut out = [[0.0; 4]; 4];
    for i in 0..4 {
        for j in 0..4 {
            for (k, bk) in b.iter().enumerate() {
                out[i][j] += a[i][k] * bk[j];
            }
        }
    }
    out
}

fn random_pose(rng: &mut SplitMix64) -> Pose {
    let (ax, ay, az) = (
        rng.next_signed() * std::f64::consts::PI,
        rng.next_signed() * std::f64::consts::PI,
        rng.next_signed() * std::f64::consts::PI,
    );
    let mul3 = |a: &[[f64; 3]; 3], b: &[[f64; 3]; 3]| {
        let mut out = [[0.0; 3]; 3];
        for i in 0..3 {
            for j in 0..3 {
                for (k, bk) in b.iter().enumerate() {
                    out[i][j] += a[i][k] * bk[j];
                }
            }
        }
        out
    };
    let rx = [
        [1.0, 0.0, 0.0],
        [0.0, ax.cos(), -ax.sin()],
        [0.0, ax.sin(), ax.cos()],
    ];
    let ry = [
        [ay.cos(), 0.0, ay.sin()],
        [0.0, 1.0, 0.0],
        [-ay.sin(), 0.0, ay.cos()],
    ];
    let rz = [
        [az.cos(), -az.sin(), 0.0],
        [az.sin(), az.cos(), 0.0],
        [0.0, 0.0, 1.0],
    ];
    Pose::new(
        mul3(&mul3(&rz, &ry), &rx),
        [
            rng.next_signed() * 400.0,
            rng.next_signed() * 400.0,
            rng.next_signed() * 400.0,
        ],
    )
    .unwrap()
}

#[test]
fn criterion_08_goal_vector_oracle() {
    let mut rng = SplitMix64::new(0x60a1);
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let t_oa = random_pose(&mut rng);
        let t_oc = random_pose(&mut rng);
        let wrist = PlanarOffset::new(rng.next_signed() * 80.0, rng.next_signed() * 80.0);
        let glove = PlanarOffset::new(0.0, rng.next_signed() * 80.0);
        let bd = solve_goal(&t_oa, &t_oc, &wrist, &glove).unwrap();

        let offset = |dy: f64, dz: f64| {
            let mut m = [[0.0; 4]; 4];
            for (i, row) in m.iter_mut().enumerate() {
                row[i] = 1.0;
            }
            m[1][3] = dy;
            m[2][3] = dz;
            m
        };
        let t_ab = mat4_mul(&mat4_from_pose(&t_oa), &offset(wrist.dy_mm, wrist.dz_mm));
        let t_cd = mat4_mul(&mat4_from_pose(&t_oc), &offset(0.0, glove.dz_mm));
        for i in 0..3 {
            worst = worst.max((bd[i] - (t_cd[i][3] - t_ab[i][3])).abs());
        }
    }
    let p = random_pose(&mut rng);
    let coincident =
        solve_goal(&p, &p, &PlanarOffset::default(), &PlanarOffset::default()).unwrap();
    let pass = worst < 1e-9 && coincident == [0.0, 0.0, 0.0];
    report(
        8,
        "goal vector",
        pass,
        &format!("100 random cases, worst |BD - oracle| = {worst:.2e}; coincident case exact zero"),
    );
}

// -------------------------------------------------------------------------
// Criterion 9: the three scripted handover scenarios.
// -------------------------------------------------------------------------

#[test]
fn criterion_09_handover_scenarios() {
    let _guard = HEAVY.lock().unwrap();
    let dir = tempfile::tempdir().unwrap();
    let subset: Vec<_> = objects::default_object_set()
        .into_iter()
        .filter(|o| {
            [
                objects::NOMINAL_OBJECT_ID,
                objects::HEAVY_OBJECT_ID,
                objects::SLIPPERY_OBJECT_ID,
            ]
            .contains(&o.id)
        })
        .collect();
    let table = dir.path().join("scenarios.txt");
    std::fs::write(&table, objects::format_object_set(&subset)).unwrap();

    let mut config = ExperimentConfig::new(dir.path().join("out"));
    config.objects_path = Some(table);
    config.trials_per_object = 2;
    config.emit_plots = false;
    let result = run_experiment2(&config).expect("scenario trials run");

    let mut pass = result.gates.scenarios.len() == 3 && result.gates.pass();
    // Per-trial scores must be exact, not just on average.
    for trial in &result.trials {
        let expected = match trial.result.object_id {
            objects::NOMINAL_OBJECT_ID => 1.0,
            objects::HEAVY_OBJECT_ID => 0.0,
            objects::SLIPPERY_OBJECT_ID => 0.5,
            _ => unreachable!(),
        };
        pass &= trial.result.score == Some(expected);
    }
    let detail: Vec<String> = result
        .gates
        .scenarios
        .iter()
        .map(|(id, expected, observed)| format!("object {id}: {observed:.1} (expected {expected})"))
        .collect();
    report(9, "handover scenarios", pass, &detail.join(", "));
}

// -------------------------------------------------------------------------
// Criterion 10: byte-identical replay with a fixed seed.
// -------------------------------------------------------------------------

fn dir_contents(root: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files = Vec::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for entry in std::fs::read_dir(&dir).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                stack.push(path);
            } else {
                let rel = path.strip_prefix(root).unwrap().to_string_lossy().into_owned();
                files.push((rel, std::fs::read(&path).unwrap()));
            }
        }
    }
    files.sort();
    files
}

#[test]
fn criterion_10_deterministic_replay() {
    let _guard = HEAVY.lock().unwrap();
    let run = |dir: &Path| {
        let mut config = ExperimentConfig::new(dir.to_path_buf());
        config.trials_per_object = 2;
        config.base_seed = 42;
        config.emit_plots = true;
        run_experiment1(&config).expect("replay runs");
    };
    let dir_a = tempfile::tempdir().unwrap();
    let dir_b = tempfile::tempdir().unwrap();
    run(dir_a.path());
    run(dir_b.path());

    let a = dir_contents(dir_a.path());
    let b = dir_contents(dir_b.path());
    let same_names = a.iter().map(|(n, _)| n).eq(b.iter().map(|(n, _)| n));
    let mut mismatched = Vec::new();
    for ((name, bytes_a), (_, bytes_b)) in a.iter().zip(&b) {
        if bytes_a != bytes_b {
            mismatched.push(name.clone());
        }
    }
    let pass = same_names && mismatched.is_empty() && !a.is_empty();
    report(
        10,
        "deterministic replay",
        pass,
        &format!(
            "two seeded exp1 runs, {} files compared byte-for-byte{}",
            a.len(),
            if mismatched.is_empty() {
                String::new()
            } else {
                format!("; mismatches: {mismatched:?}")
            }
        ),
    );
}
