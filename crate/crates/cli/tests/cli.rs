use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn embrng(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_embrng"))
        .args(args)
        .output()
        .expect("spawn embrng")
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).expect("JSON on stdout")
}

fn golden_image(dir: &TempDir) -> std::path::PathBuf {
    let path = dir.path().join("golden.img");
    let bytes: Vec<u8> = (0..64usize)
        .flat_map(|blk| (0..160usize).map(move |off| ((7 * blk + off) % 256) as u8))
        .collect();
    fs::write(&path, bytes).unwrap();
    path
}

const GOLDEN_SEED: &str = "930c8df95ab7e82efcffa87ec3b28e54bf6bb40860d71ee50cc02d5196a6303a\
                           9157fd62709e26e9ce1352e30db646e8aa9ca32930486ef05c21095e1af1d123";

#[test]
fn seed_extract_golden() {
    let dir = TempDir::new().unwrap();
    let img = golden_image(&dir);
    let seed = dir.path().join("seed.bin");
    let out = embrng(&["seed-extract", p(&img), "-o", p(&seed)]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(String::from_utf8(out.stdout).unwrap().trim(), GOLDEN_SEED);
    assert_eq!(fs::read(&seed).unwrap().len(), 64);
}

#[test]
fn seed_extract_rejects_short_image() {
    let dir = TempDir::new().unwrap();
    let img = dir.path().join("short.img");
    fs::write(&img, vec![0u8; 10239]).unwrap();
    let out = embrng(&["seed-extract", p(&img)]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("malformed SRAM image"));

    let missing = embrng(&["seed-extract", p(&dir.path().join("nope"))]);
    assert_eq!(missing.status.code(), Some(2));
}

#[test]
fn generate_matches_library_fixture() {
    let dir = TempDir::new().unwrap();
    let img = golden_image(&dir);
    let out = embrng(&["generate", "-n", "16", "--image", p(&img)]);
    assert_eq!(out.status.code(), Some(0));
    let hex: String = out.stdout.iter().map(|b| format!("{b:02x}")).collect();
    assert_eq!(hex, "53d99e7b67ff70606764f2c72a6b4544");

    let seed = dir.path().join("seed.bin");
    embrng(&["seed-extract", p(&img), "-o", p(&seed)]);
    let via_seed = embrng(&["generate", "-n", "16", "--seed-file", p(&seed)]);
    assert_eq!(via_seed.stdout, out.stdout);
}

#[test]
fn generate_is_deterministic_past_one_request() {
    let dir = TempDir::new().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    let n = (1 << 20) + 100;
    for f in [&a, &b] {
        let out = embrng(&[
            "generate",
            "-n",
            &n.to_string(),
            "--noise-seed",
            "9",
            "-o",
            p(f),
        ]);
        assert_eq!(out.status.code(), Some(0));
    }
    let (a, b) = (fs::read(a).unwrap(), fs::read(b).unwrap());
    assert_eq!(a.len(), n);
    assert_eq!(a, b);
}

#[test]
fn generate_rejects_zero_and_conflicting_sources() {
    assert_eq!(embrng(&["generate", "-n", "0"]).status.code(), Some(2));
    let out = embrng(&["generate", "-n", "4", "--seed-file", "x", "--image", "y"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn simulate_is_reproducible_with_sidecar() {
    let dir = TempDir::new().unwrap();
    let (a, b) = (dir.path().join("a.bin"), dir.path().join("b.bin"));
    for f in [&a, &b] {
        let out = embrng(&[
            "simulate",
            "temp",
            "-c",
            "5000",
            "--noise-seed",
            "3",
            "-o",
            p(f),
        ]);
        assert_eq!(out.status.code(), Some(0));
    }
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());
    let meta: Value =
        serde_json::from_slice(&fs::read(dir.path().join("a.bin.json")).unwrap()).unwrap();
    assert_eq!(meta["source_kind"], "temp");
    assert_eq!(meta["count"], 5000);
    assert_eq!(meta["config"]["noise_seed"], 3);
}

#[test]
fn simulate_zero_noise_is_constant() {
    let dir = TempDir::new().unwrap();
    let cfg = dir.path().join("cfg.json");
    fs::write(&cfg, r#"{"vlo": {"jitter_sigma": 0.0}}"#).unwrap();
    let out_path = dir.path().join("vlo.bin");
    let out = embrng(&[
        "simulate",
        "vlo",
        "-c",
        "2000",
        "--config",
        p(&cfg),
        "-o",
        p(&out_path),
    ]);
    assert_eq!(out.status.code(), Some(0));
    let expected = (24e6f64 / 9500.0).round() as u64 as u8;
    assert!(fs::read(&out_path).unwrap().iter().all(|&b| b == expected));
}

#[test]
fn simulate_rejects_bad_config() {
    let dir = TempDir::new().unwrap();
    let cfg = dir.path().join("cfg.json");
    fs::write(&cfg, r#"{"vlo": {"jitter_sigma": -1.0}}"#).unwrap();
    let out = embrng(&[
        "simulate",
        "vlo",
        "-c",
        "10",
        "--config",
        p(&cfg),
        "-o",
        p(&dir.path().join("o")),
    ]);
    assert_eq!(out.status.code(), Some(2));
    fs::write(&cfg, "not json").unwrap();
    let out = embrng(&[
        "simulate",
        "vlo",
        "-c",
        "10",
        "--config",
        p(&cfg),
        "-o",
        p(&dir.path().join("o")),
    ]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn estimate_constant_and_short_inputs() {
    let dir = TempDir::new().unwrap();
    let constant = dir.path().join("c.bin");
    fs::write(&constant, vec![0x5Au8; 200_000]).unwrap();
    let out = embrng(&["estimate", p(&constant)]);
    assert_eq!(out.status.code(), Some(0));
    let r = &json(&out)["report"];
    for k in ["min_entropy", "mcv", "collision", "markov", "compression"] {
        assert!(r[k].as_f64().unwrap() <= 0.01, "{k}: {}", r[k]);
    }

    let short = dir.path().join("s.bin");
    fs::write(&short, vec![1u8; 500]).unwrap();
    let out = embrng(&["estimate", p(&short)]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("at least 1000"));
}

#[test]
fn estimate_uniform_and_vlo() {
    let dir = TempDir::new().unwrap();
    let uniform = dir.path().join("u.bin");
    embrng(&["generate", "-n", "1000000", "-o", p(&uniform)]);
    let r = json(&embrng(&["estimate", p(&uniform)]));
    assert!(
        r["report"]["min_entropy"].as_f64().unwrap() > 6.5,
        "{}",
        r["report"]
    );

    let vlo = dir.path().join("vlo.bin");
    embrng(&["simulate", "vlo", "-c", "1000000", "-o", p(&vlo)]);
    let out = embrng(&["estimate", p(&vlo)]);
    let r = json(&out);
    assert_eq!(r["source_kind"], "vlo");
    let h = r["report"]["min_entropy"].as_f64().unwrap();
    assert!((1.19..=1.6).contains(&h), "{h}");

    let table = embrng(&["estimate", p(&vlo), "--table"]);
    assert!(String::from_utf8_lossy(&table.stdout).contains("Compression Est."));
}

#[test]
fn sts_generated_batch_passes_and_zeros_fail() {
    let out = embrng(&["sts", "--generate", "20", "--bits", "100000"]);
    assert_eq!(out.status.code(), Some(0));
    let r = json(&out);
    assert_eq!(r["sequences"], 20);
    assert_eq!(r["tests"].as_array().unwrap().len(), 6);

    let dir = TempDir::new().unwrap();
    let zeros = dir.path().join("z.bin");
    fs::write(&zeros, vec![0u8; 12_500]).unwrap();
    let out = embrng(&["sts", p(&zeros), p(&zeros), "--table"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stdout).contains("0/2*"));
}

#[test]
fn sts_accepts_ascii_and_rejects_empty() {
    let dir = TempDir::new().unwrap();
    let f = dir.path().join("bits.txt");
    let bits: String = (0..2000u32)
        .map(|i| if (i * 7919 + i / 3) % 5 < 2 { '1' } else { '0' })
        .collect();
    fs::write(&f, bits).unwrap();
    let out = embrng(&["sts", p(&f), "--format", "ascii", "--block-len", "20"]);
    assert!(matches!(out.status.code(), Some(0 | 1)));
    assert_eq!(json(&out)["sequences"], 1);

    assert_eq!(embrng(&["sts"]).status.code(), Some(2));
    assert_eq!(embrng(&["sts", "--generate", "0"]).status.code(), Some(2));
}

#[test]
fn harvest_reports_both_cadences() {
    let out = embrng(&["harvest", "--duration", "0.5"]);
    assert_eq!(out.status.code(), Some(0));
    let r = json(&out);
    assert_eq!(r["stats"]["pool0_events_at_first_reseed"], 58);
    assert!(r["stats"]["cadence"]["round_robin_secs"].as_f64().unwrap() > 0.09);
    assert!(r["stats"]["cadence"]["direct_secs"].as_f64().unwrap() < 0.004);
    assert_eq!(r["generator_seeded"], true);
    assert_eq!(r["pools"]["event_counts"].as_array().unwrap().len(), 32);
}

#[test]
fn pipeline_is_deterministic() {
    let args = [
        "pipeline",
        "--streams",
        "4",
        "--bits",
        "20000",
        "--harvest-seconds",
        "0.1",
    ];
    let (a, b) = (embrng(&args), embrng(&args));
    assert!(matches!(a.status.code(), Some(0 | 1)));
    assert_eq!(a.stdout, b.stdout);
    let r = json(&a);
    assert_eq!(r["distinct_seeds"], 4);
    assert!(r["total_reseeds"].as_u64().unwrap() >= 4);
}

#[test]
fn report_file_is_written() {
    let dir = TempDir::new().unwrap();
    let report = dir.path().join("r.json");
    let out = embrng(&[
        "harvest",
        "--duration",
        "0.2",
        "--table",
        "--report",
        p(&report),
    ]);
    assert_eq!(out.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&out.stdout).contains("round-robin"));
    let r: Value = serde_json::from_slice(&fs::read(report).unwrap()).unwrap();
    assert!(r["stats"].is_object());
}
