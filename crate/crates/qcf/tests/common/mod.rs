//! Shared by the integration tests.
#![allow(dead_code)]

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::Command;

fn run(args: &[&str]) {
    let o = Command::new(env!("CARGO_BIN_EXE_qcf"))
        .args(args)
        .env_remove("QCF_THREADS")
        .output()
        .expect("spawn qcf");
    assert!(
        o.status.success(),
        "qcf {args:?} exited {:?}: {}",
        o.status.code(),
        String::from_utf8_lossy(&o.stderr)
    );
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

/// Runs every stage into `root`; returns the eval directory.
pub fn toy_chain(root: &Path, seed: u64, threads: usize) -> PathBuf {
    let toy = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data/toy");
    let seed = seed.to_string();
    let threads = threads.to_string();
    let common = ["--seed", seed.as_str(), "--threads", threads.as_str()];
    let mut probes = Vec::new();
    let mut tests = Vec::new();
    for c in ["blobs", "stripes"] {
        let d = root.join(c);
        for kind in ["real", "fake"] {
            let m = toy.join(format!("{c}_{kind}.json"));
            let out = d.join(kind);
            run(&[
                &[
                    "extract",
                    "--manifest",
                    p(&m),
                    "--dim",
                    "16",
                    "--augment",
                    "--out",
                    p(&out),
                ],
                &common[..],
            ]
            .concat());
        }
        let reals = d.join("real/features.qcfs");
        let fakes = d.join("fake/features.qcfs");
        run(&[
            &[
                "fit-gmm",
                "--features",
                p(&reals),
                "--components",
                "2",
                "--out",
                p(&d.join("gmm")),
            ],
            &common[..],
        ]
        .concat());
        run(&[
            &[
                "score",
                "--gmm",
                p(&d.join("gmm/gmm.json")),
                "--features",
                p(&fakes),
                "--out",
                p(&d.join("score")),
            ],
            &common[..],
        ]
        .concat());
        for strategy in ["qc", "random"] {
            let split = d.join(format!("split_{strategy}"));
            let probe = d.join(format!("probe_{strategy}"));
            run(&[
                &[
                    "curate",
                    "--fakes",
                    p(&fakes),
                    "--scores",
                    p(&d.join("score/scores.csv")),
                    "--reals",
                    p(&reals),
                    "--strategy",
                    strategy,
                    "--k",
                    "6",
                    "--test-size",
                    "4",
                    "--out",
                    p(&split),
                ],
                &common[..],
            ]
            .concat());
            run(&[
                &[
                    "train",
                    "--split",
                    p(&split),
                    "--epochs",
                    "5",
                    "--batch-size",
                    "4",
                    "--hidden",
                    "8",
                    "--out",
                    p(&probe),
                ],
                &common[..],
            ]
            .concat());
            probes.push(probe);
        }
        tests.push(d.join("split_qc"));
    }
    let eval = root.join("eval");
    let mut args: Vec<String> = vec!["eval".into()];
    for pr in &probes {
        args.extend(["--probe".into(), p(pr).into()]);
    }
    for t in &tests {
        args.extend(["--test".into(), p(t).into()]);
    }
    args.extend(["--out".into(), p(&eval).into()]);
    args.extend(common.iter().map(|s| s.to_string()));
    run(&args.iter().map(String::as_str).collect::<Vec<_>>());
    let spectra = root.join("spectra");
    let mut args = vec!["spectra".to_string()];
    for m in ["blobs_real", "blobs_fake", "stripes_real", "stripes_fake"] {
        args.extend(["--manifest".into(), p(&toy.join(format!("{m}.json"))).into()]);
    }
    args.extend(["--out".into(), p(&spectra).into()]);
    args.extend(common.iter().map(|s| s.to_string()));
    run(&args.iter().map(String::as_str).collect::<Vec<_>>());
    eval
}

/// Relative path → bytes for every file below `root`.
pub fn snapshot(root: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    fn walk(root: &Path, dir: &Path, out: &mut BTreeMap<PathBuf, Vec<u8>>) {
        for e in std::fs::read_dir(dir).unwrap() {
            let path = e.unwrap().path();
            if path.is_dir() {
                walk(root, &path, out);
            } else {
                out.insert(
                    path.strip_prefix(root).unwrap().to_path_buf(),
                    std::fs::read(&path).unwrap(),
                );
            }
        }
    }
    let mut out = BTreeMap::new();
    walk(root, root, &mut out);
    out
}
