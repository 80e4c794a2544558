//! Committed PGM fixture pairs with oracle-computed similarity values.
//!
//! `tests/fixtures/ssim_expected.txt` lists one pair per line:
//! `<live.pgm> <reference.pgm> <expected ssim to 9 decimal places>`,
//! produced by the brute-force oracle below (re-run the ignored generator
//! to rebuild after a renderer change).

use std::path::{Path, PathBuf};

use softgrasp::pgm;
use softgrasp_core::rng::SplitMix64;
use softgrasp_core::sim::{render_tactile, SimConfig};
use softgrasp_core::ssim::{ssim, SsimParams};
use softgrasp_core::TactileImage;

fn fixture_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures")
}

/// Independent scalar-loop reference; per-window two-pass statistics.
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

fn random_image(seed: u64, size: usize) -> TactileImage {
    let mut rng = SplitMix64::new(seed);
    let pixels: Vec<u8> = (0..size * size).map(|_| (rng.next_u64() % 256) as u8).collect();
    TactileImage::from_gray8(size, size, &pixels).unwrap()
}

/// A correlated variant of `base`: seeded additive perturbation, the way a
/// live frame relates to its reference.
fn perturbed_image(base: &TactileImage, seed: u64, amplitude: f64) -> TactileImage {
    let mut rng = SplitMix64::new(seed);
    let pixels: Vec<f64> = base
        .pixels()
        .iter()
        .map(|&p| (p + amplitude * rng.next_signed()).clamp(0.0, 255.0))
        .collect();
    TactileImage::new(base.width(), base.height(), pixels).unwrap()
}

fn fixture_pairs() -> Vec<(&'static str, &'static str, TactileImage, TactileImage)> {
    let cfg = SimConfig::default();
    let reference = render_tactile(0.0, &cfg, 0);
    vec![
        (
            "pins_f0500.pgm",
            "pins_ref.pgm",
            render_tactile(0.5, &cfg, 21),
            reference.clone(),
        ),
        (
            "pins_f1500.pgm",
            "pins_ref.pgm",
            render_tactile(1.5, &cfg, 21),
            reference.clone(),
        ),
        (
            "pins_f3000.pgm",
            "pins_ref.pgm",
            render_tactile(3.0, &cfg, 21),
            reference,
        ),
        {
            let base = random_image(0xfeed_f00d, 48);
            let live = perturbed_image(&base, 0x0dd_ba11, 35.0);
            ("noise_live.pgm", "noise_ref.pgm", live, base)
        },
        (
            "noise_a.pgm",
            "noise_b.pgm",
            random_image(0xfeed_f00d, 48),
            random_image(0x0dd_ba11, 48),
        ),
    ]
}

/// Rebuilds the committed fixtures:
/// `cargo test -p softgrasp --test fixtures -- --ignored regenerate`
#[test]
#[ignore]
fn regenerate() {
    let dir = fixture_dir();
    std::fs::create_dir_all(&dir).unwrap();
    let p = SsimParams::default();
    let mut listing = String::new();
    for (live_name, ref_name, live, reference) in fixture_pairs() {
        // PGM quantizes to 8 bits; compute the oracle on the decoded
        // images so the listing matches what a reader sees.
        pgm::write_pgm(&dir.join(live_name), &live).unwrap();
        pgm::write_pgm(&dir.join(ref_name), &reference).unwrap();
        let live = pgm::read_pgm(&dir.join(live_name)).unwrap();
        let reference = pgm::read_pgm(&dir.join(ref_name)).unwrap();
        let expected = oracle_ssim(&live, &reference, &p);
        listing.push_str(&format!("{live_name} {ref_name} {expected:.9}\n"));
    }
    std::fs::write(dir.join("ssim_expected.txt"), listing).unwrap();
}

#[test]
fn library_matches_fixture_listing() {
    let dir = fixture_dir();
    let listing = std::fs::read_to_string(dir.join("ssim_expected.txt"))
        .expect("committed fixture listing");
    let p = SsimParams::default();
    let mut checked = 0;
    for line in listing.lines() {
        let mut fields = line.split_ascii_whitespace();
        let live_name = fields.next().unwrap();
        let ref_name = fields.next().unwrap();
        let expected: f64 = fields.next().unwrap().parse().unwrap();
        let live = pgm::read_pgm(&dir.join(live_name)).unwrap();
        let reference = pgm::read_pgm(&dir.join(ref_name)).unwrap();
        let got = ssim(&live, &reference, &p).unwrap();
        assert!(
            (got - expected).abs() < 1e-9,
            "{live_name} vs {ref_name}: ssim {got:.12}, fixture {expected:.9}"
        );
        checked += 1;
    }
    assert_eq!(checked, 5);
}

/// The committed fixtures must stay in sync with the renderer.
#[test]
fn fixture_frames_match_current_renderer() {
    let dir = fixture_dir();
    for (live_name, _, live, _) in fixture_pairs() {
        let on_disk = pgm::read_pgm(&dir.join(live_name)).unwrap();
        let rerendered = TactileImage::from_gray8(
            live.width(),
            live.height(),
            &live.to_gray8(),
        )
        .unwrap();
        assert_eq!(on_disk, rerendered, "{live_name} is stale; re-run the generator");
    }
}
