use std::ffi::{CStr, CString};
use std::path::Path;
use std::ptr;

use vadtl::features::{extract_all, fit_normalizer, FEATURE_DIM};
use vadtl::network::io::{save_model, ModelInfo};
use vadtl::network::{init_layer, predict, NetworkStack, TrainConfig};
use vadtl::signal::AudioSignal;
use vadtl_ffi::*;

fn tone(n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| {
            let t = i as f64 / 8000.0;
            let env = if (i / 2000) % 2 == 0 { 0.5 } else { 0.01 };
            env * (2.0 * std::f64::consts::PI * 220.0 * t).sin() + 1e-3 * ((i * 7919 % 101) as f64 / 101.0 - 0.5)
        })
        .collect()
}

fn last_error() -> String {
    let p = vadtl_last_error();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

fn cpath(p: &Path) -> CString {
    CString::new(p.to_str().unwrap()).unwrap()
}

fn write_model(dir: &Path) -> (std::path::PathBuf, NetworkStack) {
    let stack = NetworkStack::assemble(vec![init_layer(FEATURE_DIM, 54, 1), init_layer(54, 7, 2)], 3).unwrap();
    let path = dir.join("m.ddnn");
    let info = ModelInfo {
        config: TrainConfig::default(),
        seed: 3,
        normalizer: None,
        scheme: None,
        source: None,
        target: None,
    };
    save_model(&path, &stack, &info).unwrap();
    (path, stack)
}

#[test]
fn constants() {
    assert_eq!(vadtl_feature_dim(), 273);
    assert_eq!(vadtl_frame_count(199, 8000), 0);
    assert_eq!(vadtl_frame_count(200, 8000), 1);
    assert_eq!(vadtl_frame_count(8000, 8000), 98);
    let v = unsafe { CStr::from_ptr(vadtl_version()) }.to_str().unwrap();
    assert_eq!(v, env!("CARGO_PKG_VERSION"));
}

#[test]
fn extraction_matches_core() {
    let s = tone(8000);
    let mut rows = 0usize;
    let st = unsafe { vadtl_extract_features(s.as_ptr(), s.len(), 8000, ptr::null_mut(), 0, &mut rows) };
    assert_eq!(st, VadtlStatus::Ok);
    assert_eq!(rows, 98);
    assert!(vadtl_last_error().is_null());

    let mut small = vec![0.0; 10];
    let st = unsafe { vadtl_extract_features(s.as_ptr(), s.len(), 8000, small.as_mut_ptr(), small.len(), &mut rows) };
    assert_eq!(st, VadtlStatus::BufferTooSmall);
    assert_eq!(rows, 98);
    assert!(last_error().contains("needed"));

    let mut out = vec![0.0; rows * FEATURE_DIM];
    let st = unsafe { vadtl_extract_features(s.as_ptr(), s.len(), 8000, out.as_mut_ptr(), out.len(), &mut rows) };
    assert_eq!(st, VadtlStatus::Ok);
    let core = extract_all(&AudioSignal::new(s, 8000)).unwrap();
    assert_eq!(out, core.values.iter().copied().collect::<Vec<_>>());
}

#[test]
fn bad_arguments() {
    let mut rows = 0usize;
    let st = unsafe { vadtl_extract_features(ptr::null(), 10, 8000, ptr::null_mut(), 0, &mut rows) };
    assert_eq!(st, VadtlStatus::NullPointer);
    assert!(last_error().contains("samples"));
    let s = tone(100);
    let st = unsafe { vadtl_extract_features(s.as_ptr(), s.len(), 8000, ptr::null_mut(), 0, &mut rows) };
    assert_eq!(st, VadtlStatus::InsufficientData);
    let st = unsafe { vadtl_extract_features(s.as_ptr(), s.len(), 0, ptr::null_mut(), 0, &mut rows) };
    assert_eq!(st, VadtlStatus::InvalidArgument);

    let mut m: *mut VadtlModel = ptr::null_mut();
    let missing = CString::new("/definitely/not/here.ddnn").unwrap();
    assert_eq!(unsafe { vadtl_model_load(missing.as_ptr(), &mut m) }, VadtlStatus::Io);
    assert!(m.is_null());
    assert!(last_error().contains("here.ddnn"));
    unsafe {
        vadtl_model_free(ptr::null_mut());
        vadtl_normalizer_free(ptr::null_mut());
        assert_eq!(vadtl_model_depth(ptr::null()), 0);
    }
}

#[test]
fn corrupt_model_is_format_error() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("bad.ddnn");
    std::fs::write(&p, b"DDNNgarbage").unwrap();
    let mut m: *mut VadtlModel = ptr::null_mut();
    assert_eq!(unsafe { vadtl_model_load(cpath(&p).as_ptr(), &mut m) }, VadtlStatus::Format);
}

#[test]
fn model_and_normalizer_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let (path, stack) = write_model(dir.path());
    let raw = extract_all(&AudioSignal::new(tone(16000), 8000)).unwrap();
    let norm = fit_normalizer(&[&raw], "t").unwrap();
    let norm_path = dir.path().join("n.csv");
    norm.save_csv(&norm_path).unwrap();

    unsafe {
        let mut m: *mut VadtlModel = ptr::null_mut();
        assert_eq!(vadtl_model_load(cpath(&path).as_ptr(), &mut m), VadtlStatus::Ok);
        assert_eq!(vadtl_model_input_dim(m), FEATURE_DIM);
        assert_eq!(vadtl_model_depth(m), 2);
        let mut n: *mut VadtlNormalizer = ptr::null_mut();
        assert_eq!(vadtl_normalizer_load(cpath(&norm_path).as_ptr(), &mut n), VadtlStatus::Ok);

        let rows = raw.rows();
        let mut data: Vec<f64> = raw.values.iter().copied().collect();
        assert_eq!(vadtl_normalizer_apply(n, data.as_mut_ptr(), rows, FEATURE_DIM), VadtlStatus::Ok);
        let scaled = norm.apply(&raw).unwrap();
        assert_eq!(data, scaled.values.iter().copied().collect::<Vec<_>>());
        assert_eq!(vadtl_normalizer_apply(n, data.as_mut_ptr(), rows, 5), VadtlStatus::DimensionMismatch);

        let mut probs = vec![0.0; rows];
        let mut labels = vec![9u8; rows];
        let st = vadtl_model_predict(m, data.as_ptr(), rows, FEATURE_DIM, probs.as_mut_ptr(), labels.as_mut_ptr());
        assert_eq!(st, VadtlStatus::Ok);
        let core = predict(&stack, &scaled).unwrap();
        assert_eq!(probs, core.probabilities);
        let core_labels: Vec<u8> = core.labels.iter().map(|l| l.is_speech() as u8).collect();
        assert_eq!(labels, core_labels);
        let st = vadtl_model_predict(m, data.as_ptr(), rows, 4, probs.as_mut_ptr(), ptr::null_mut());
        assert_eq!(st, VadtlStatus::DimensionMismatch);

        let audio = tone(16000);
        let mut frames = 0usize;
        let mut det = vec![0u8; rows];
        let st = vadtl_detect(m, n, audio.as_ptr(), audio.len(), 8000, det.as_mut_ptr(), det.len(), &mut frames);
        assert_eq!(st, VadtlStatus::Ok);
        assert_eq!(frames, rows);
        assert_eq!(det, core_labels);
        let st = vadtl_detect(m, n, audio.as_ptr(), audio.len(), 8000, det.as_mut_ptr(), 3, &mut frames);
        assert_eq!(st, VadtlStatus::BufferTooSmall);

        vadtl_model_free(m);
        vadtl_normalizer_free(n);
    }
}

#[test]
fn similarity_matches_direct_formula() {
    let a = [0.1, 0.2, 0.3, 0.3, 0.4, 0.5];
    let b = [0.9, 0.8, 0.7, 0.6, 0.7, 0.8, 0.5, 0.5, 0.5];
    let mut s = 0.0;
    let st = unsafe { vadtl_similarity(a.as_ptr(), 2, b.as_ptr(), 3, 3, &mut s) };
    assert_eq!(st, VadtlStatus::Ok);
    let ca = [0.2, 0.3, 0.4];
    let cb = [2.0 / 3.0, 2.0 / 3.0, 2.0 / 3.0];
    let d2: f64 = ca.iter().zip(&cb).map(|(x, y)| (x - y) * (x - y)).sum();
    assert!((s - (-d2 / 2.0).exp()).abs() < 1e-12);
    let st = unsafe { vadtl_similarity(a.as_ptr(), 0, b.as_ptr(), 3, 3, &mut s) };
    assert_eq!(st, VadtlStatus::InsufficientData);
}

#[test]
fn errors_are_per_thread() {
    let mut rows = 0usize;
    unsafe { vadtl_extract_features(ptr::null(), 10, 8000, ptr::null_mut(), 0, &mut rows) };
    assert!(!vadtl_last_error().is_null());
    std::thread::spawn(|| assert!(vadtl_last_error().is_null())).join().unwrap();
}

#[test]
fn header_declares_every_export() {
    let header = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/include/vadtl.h")).unwrap();
    let src = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/src/lib.rs")).unwrap();
    let exports: Vec<&str> = src
        .lines()
        .filter_map(|l| l.split("extern \"C\" fn ").nth(1))
        .map(|rest| rest.split('(').next().unwrap())
        .collect();
    assert!(exports.len() >= 14);
    for name in exports {
        assert!(header.contains(&format!("{name}(")), "{name} missing from header");
    }
    assert!(header.contains("typedef struct VadtlModel VadtlModel;"));
    assert!(header.contains("VADTL_STATUS_BUFFER_TOO_SMALL = 7"));
}

#[test]
fn header_compiles_as_c() {
    let cc = std::env::var("CC").unwrap_or_else(|_| "cc".into());
    let dir = tempfile::tempdir().unwrap();
    let main = dir.path().join("main.c");
    std::fs::write(
        &main,
        "#include \"vadtl.h\"\nint main(void) { return vadtl_feature_dim() == 273 ? 0 : 1; }\n",
    )
    .unwrap();
    let out = match std::process::Command::new(&cc)
        .args(["-std=c99", "-Wall", "-Werror", "-fsyntax-only", "-I"])
        .arg(concat!(env!("CARGO_MANIFEST_DIR"), "/include"))
        .arg(&main)
        .output()
    {
        Ok(o) => o,
        Err(_) => {
            eprintln!("no C compiler ({cc}); skipping");
            return;
        }
    };
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
}
