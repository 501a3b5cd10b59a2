use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use bfdn::cli::run;
use bfdn::io::csv::read_table;
use bfdn::io::{load_pgm, synth_dataset, synth_images, DatasetManifest, PgmImage};
use bfdn::Error;

fn s(p: &Path) -> String {
    p.to_string_lossy().into_owned()
}

fn bfdn(args: &[&str]) -> i32 {
    run(std::iter::once("bfdn").chain(args.iter().copied()))
}

#[test]
fn pgm_header_with_comments_fixture() {
    let mut bytes = b"P5\n# made by hand\n3 # width\n2\n# maxval next\n255\n".to_vec();
    bytes.extend_from_slice(&[0, 10, 20, 30, 40, 255]);
    let img = PgmImage::from_bytes(&bytes).unwrap();
    assert_eq!((img.width, img.height, img.maxval), (3, 2, 255));
    assert_eq!(img.pixels, vec![0, 10, 20, 30, 40, 255]);

    let wide = [b"P5 1 1 65535\n".as_slice(), &[0x12, 0x34]].concat();
    assert_eq!(PgmImage::from_bytes(&wide).unwrap().pixels, vec![0x1234]);
}

#[test]
fn pgm_rejects_ascii_and_truncated_files() {
    let err = PgmImage::from_bytes(b"P2\n2 1\n255\n0 1\n").unwrap_err();
    assert!(matches!(err, Error::Pgm(ref m) if m.contains("P2")), "{err}");
    assert!(PgmImage::from_bytes(b"P5\n2 2\n255\n\x00\x01").is_err());
    assert!(PgmImage::from_bytes(b"P5\n2 2\n0\n\x00\x00\x00\x00").is_err());
}

#[test]
fn synth_is_seeded_and_piecewise_constant() {
    let dir = tempfile::tempdir().unwrap();
    let a = synth_dataset(5, 64, 42, dir.path().join("a")).unwrap();
    let b = synth_dataset(5, 64, 42, dir.path().join("b")).unwrap();
    let sums = |m: &DatasetManifest| m.files.iter().map(|e| e.sha256.clone()).collect::<Vec<_>>();
    assert_eq!(sums(&a), sums(&b));
    assert!(a.verify().unwrap().is_empty());
    let c = synth_dataset(5, 64, 43, dir.path().join("c")).unwrap();
    assert_ne!(sums(&a), sums(&c));

    // A plateau is a gray level (in 4-level bins) holding at least 2% of the pixels.
    let imgs = synth_images(12, 96, 5);
    let mut total = 0usize;
    for img in &imgs {
        let mut hist = [0usize; 64];
        for &v in img.data() {
            hist[(v as usize / 4).min(63)] += 1;
        }
        total += hist.iter().filter(|&&c| c * 50 >= img.len()).count();
    }
    let mean = total as f64 / imgs.len() as f64;
    assert!(mean >= 5.0, "mean plateau count {mean}");

    let empty = synth_dataset(0, 64, 1, dir.path().join("empty")).unwrap();
    assert!(empty.files.is_empty());
    assert!(synth_dataset(1, 16, 1, dir.path().join("small")).is_err());
}

#[test]
fn manifest_splits_are_disjoint() {
    let dir = tempfile::tempdir().unwrap();
    let m = synth_dataset(20, 32, 9, dir.path()).unwrap();
    let names: BTreeSet<&str> = m.files.iter().map(|e| e.file.as_str()).collect();
    assert_eq!(names.len(), 20);
    let reopened = DatasetManifest::open(dir.path()).unwrap();
    assert_eq!(reopened.files, m.files);
}

fn assert_csv(path: &Path, header: &[&str]) -> Vec<Vec<String>> {
    let text = std::fs::read_to_string(path).unwrap();
    let first = text.lines().next().unwrap();
    assert!(first.starts_with("# "), "{}: {first}", path.display());
    assert!(text.contains("seed=") && text.contains("config_sha256=") && text.contains("version="));
    let (h, rows) = read_table(&text).unwrap();
    assert_eq!(h, header, "{}", path.display());
    rows
}

#[test]
fn command_line_end_to_end() {
    let dir = tempfile::tempdir().unwrap();
    let p = |name: &str| -> PathBuf { dir.path().join(name) };
    let data = p("data");
    assert_eq!(bfdn(&["--seed", "2", "synth", "--count", "5", "--size", "48", "--out", &s(&data)]), 0);
    std::fs::write(
        p("config.json"),
        r#"{"schema":"bfdn-config/1","seed":1,
            "model":{"arch":"dncnn","depth":3,"channels":4,"bias_enabled":false},
            "train":{"epochs":1,"steps_per_epoch":2,"batch_size":2,"patch_size":24,"patch_stride":24}}"#,
    )
    .unwrap();
    let ckpt = p("m.bfdn");
    assert_eq!(
        bfdn(&["train", "--config", &s(&p("config.json")), "--data", &s(&data), "--out", &s(&ckpt)]),
        0
    );
    let log = assert_csv(&p("m.bfdn.log.csv"), &["epoch", "mse", "val_psnr", "lr", "seconds"]);
    assert_eq!(log.len(), 1);
    let text = std::fs::read_to_string(p("m.bfdn.log.csv")).unwrap();
    assert!(text.starts_with("# train_sigma=0,55 noise=gaussian\n"));

    let img = data.join("synth_0000.pgm");
    assert_eq!(
        bfdn(&["--seed", "4", "denoise", "--ckpt", &s(&ckpt), "--in", &s(&img), "--sigma", "20", "--out", &s(&p("dn.pgm"))]),
        0
    );
    let dn = load_pgm(p("dn.pgm")).unwrap();
    assert_eq!((dn.width, dn.height), (48, 48));

    assert_eq!(
        bfdn(&["eval-sweep", "--ckpt", &s(&ckpt), "--data", &s(&data), "--sigmas", "25", "--out", &s(&p("sweep.csv"))]),
        0
    );
    let rows = assert_csv(
        &p("sweep.csv"),
        &["sigma", "input_psnr", "output_psnr", "output_ssim", "noise_stream"],
    );
    assert_eq!(rows.len(), 1);
    assert_eq!(rows[0][0], "25");

    assert_eq!(
        bfdn(&["analyze", "bias", "--ckpt", &s(&ckpt), "--sigmas", "10,50", "--patch", "16", "--images", "2", "--out", &s(&p("bias.csv"))]),
        0
    );
    let bias = assert_csv(&p("bias.csv"), &["sigma", "residual_norm", "bias_norm", "output_norm", "noise_norm", "noise_stream"]);
    assert_eq!(bias.len(), 2);

    let jac = p("jac");
    assert_eq!(
        bfdn(&[
            "analyze", "jacobian", "--ckpt", &s(&ckpt), "--in", &s(&img), "--sigma", "20", "--pixels", "2,3;7,7", "--patch",
            "12", "--out-dir", &s(&jac),
        ]),
        0
    );
    for f in ["clean.pgm", "noisy.pgm", "denoised.pgm", "filter_2_3.pgm", "filter_7_7.pgm", "scaling.txt", "linearity.txt"] {
        assert!(jac.join(f).exists(), "{f}");
    }
    let filters = assert_csv(&jac.join("filters.csv"), &["i", "j", "row_sum"]);
    assert_eq!(filters.len(), 2);

    let svd = p("svd");
    assert_eq!(
        bfdn(&[
            "analyze", "svd", "--ckpt", &s(&ckpt), "--in", &s(&img), "--sigmas", "10,40", "--patch", "10", "--vectors", "2",
            "--out-dir", &s(&svd),
        ]),
        0
    );
    for f in ["summary.csv", "spectrum.csv", "nested.csv", "u_sigma10_0.pgm", "u_sigma40_1.pgm"] {
        assert!(svd.join(f).exists(), "{f}");
    }
    let spectrum = assert_csv(&svd.join("spectrum.csv"), &["sigma", "index", "singular_value", "alignment"]);
    assert_eq!(spectrum.len(), 200);

    assert_eq!(bfdn(&["check", "homogeneity", "--ckpt", &s(&ckpt), "--tolerance", "1e-6"]), 0);
    assert_eq!(bfdn(&["check", "homogeneity", "--size", "24", "--tolerance", "1e-6"]), 0);
}

#[test]
fn usage_errors_exit_with_two() {
    assert_eq!(bfdn(&["frobnicate"]), 2);
    assert_eq!(bfdn(&["synth", "--count", "1", "--bogus"]), 2);
    assert_eq!(bfdn(&["eval-sweep", "--ckpt", "x"]), 2);
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("bad.json"), r#"{"schema":"bfdn-config/1","surprise":1}"#).unwrap();
    let out = dir.path().join("m.bfdn");
    let code = bfdn(&["train", "--config", &s(&dir.path().join("bad.json")), "--data", &s(dir.path()), "--out", &s(&out)]);
    assert_eq!(code, 2);
    assert_eq!(bfdn(&["denoise", "--ckpt", &s(&dir.path().join("missing.bfdn")), "--in", "x.pgm", "--out", "y.pgm"]), 1);
}
