use std::fs;

use loopsoup::cli::{main_with_args, run, RunConfig};

fn args(s: &str) -> Vec<String> {
    std::iter::once("loopsoup".to_string()).chain(s.split_whitespace().map(String::from)).collect()
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().display();
    assert_eq!(main_with_args(args(&format!("alpha --z 0,0 --delta 0.1 --R 1 --out {out}"))), 0);
    assert_eq!(main_with_args(args("one-point --beta 7 --z 0,0 --delta 0.1")), 2);
    assert_eq!(main_with_args(args("alpha --z 0,0 --delta 0.1 --R 1 --config /nonexistent.cfg")), 2);
    assert_eq!(main_with_args(args(&format!("alpha --z 0,0 --delta 0 --R 1 --out {out}"))), 2);
    // A point outside the domain is a parameter error.
    assert_eq!(main_with_args(args(&format!("alpha --form in-domain --z 2,0 --delta 0.1 --out {out}"))), 2);
    let blocker = dir.path().join("file");
    fs::write(&blocker, "").unwrap();
    assert_eq!(main_with_args(args(&format!("alpha --z 0,0 --delta 0.1 --R 1 --out {}", blocker.join("sub").display()))), 5);
}

#[test]
fn reruns_are_byte_identical() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let cmd = "two-point --kind disk --z 0.3,0 --w -0.3,0 --delta 0.2 --lambda 0.25 --beta 1.5 --soups 200 --seed 5";
    let ma = run(&RunConfig::from_args(args(&format!("{cmd} --out {}", a.path().display()))).unwrap()).unwrap();
    let mb = run(&RunConfig::from_args(args(&format!("{cmd} --out {}", b.path().display()))).unwrap()).unwrap();
    assert_eq!(ma.checksums, mb.checksums);
    assert_eq!(fs::read(a.path().join("two_point.csv")).unwrap(), fs::read(b.path().join("two_point.csv")).unwrap());
    assert!(ma.bias.t_min.is_some() && ma.bias.raster_resolution.is_some());
    let manifest: serde_json::Value = serde_json::from_str(&fs::read_to_string(a.path().join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["rng"], "ChaCha8Rng/set_stream");
}

#[test]
fn kernel_and_gmc_files() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().display();
    let m = run(&RunConfig::from_args(args(&format!("gmc-sample --kind disk --delta 0.2 --resolution 3 --xi 0.5 --out {out}"))).unwrap()).unwrap();
    assert!(m.bias.psd_jitter.is_some());
    let text = fs::read_to_string(dir.path().join("gmc_field.csv")).unwrap();
    assert_eq!(text.lines().next().unwrap(), "x,y,re,im");
    run(&RunConfig::from_args(args(&format!("kernel --kind loop --delta 0.2 --resolution 3 --out {out}"))).unwrap()).unwrap();
    assert!(dir.path().join("kernel.csv").exists() && dir.path().join("kernel.json").exists());
}

#[test]
fn output_dir_from_environment() {
    let dir = tempfile::tempdir().unwrap();
    std::env::set_var("LOOPSOUP_OUT", dir.path());
    let m = run(&RunConfig::from_args(args("lemma-check --lemma triple-integral --resolution 12")).unwrap()).unwrap();
    std::env::remove_var("LOOPSOUP_OUT");
    assert!(m.checksums.contains_key("lemma_check.json"));
    assert!(dir.path().join("manifest.json").exists());
}
