use std::path::Path;
use std::time::Duration;

use alseg::learner::{classify_volume, parse_seeds, uncertainty_volume, ClassifyOptions};
use alseg::postproc::{metrics, threshold, BinaryVolume};
use alseg::scenario::{label_from_truth, plate_phantom, PLATE_SCHEDULE};
use alseg::svm::model_from_bytes;
use alseg::volume::{make_phantom, open_volume, save_volume, Dtype, LoadOptions, Samples, VoxelSource, VoxelVolume};
use alseg_server::*;
use axum::body::Body;
use axum::http::{Request, StatusCode};
use axum::Router;
use http_body_util::BodyExt;
use tower::ServiceExt;

const SMALL: &str = r#"
[phantom]
dims = [32, 32, 32]
background = 60.0
noise_sigma = 10.0
seed = 3

[[phantom.primitives]]
kind = "box"
min = [4.0, 4.0, 12.0]
max = [28.0, 28.0, 20.0]
value = 140.0
"#;

const FOUR: &str = "10 10 16 +1\n20 22 15 +1\n10 10 5 -1\n22 20 27 -1\n";

fn app() -> Router {
    router(AppState::new(ServerConfig {
        workers: 2,
        ..Default::default()
    }))
}

async fn call(app: &Router, method: &str, uri: &str, body: &str) -> (StatusCode, Vec<u8>) {
    let req = Request::builder()
        .method(method)
        .uri(uri)
        .body(Body::from(body.to_string()))
        .unwrap();
    let resp = app.clone().oneshot(req).await.unwrap();
    let status = resp.status();
    let bytes = resp.into_body().collect().await.unwrap().to_bytes().to_vec();
    (status, bytes)
}

fn doc<T: for<'de> serde::Deserialize<'de>>(bytes: &[u8]) -> T {
    toml::from_str(std::str::from_utf8(bytes).unwrap()).unwrap()
}

fn error_of(bytes: &[u8]) -> String {
    let t: toml::Table = doc(bytes);
    assert!(t.contains_key("message"));
    t["code"].as_str().unwrap().to_string()
}

async fn create(app: &Router, body: &str) -> u64 {
    let (st, b) = call(app, "POST", "/sessions", body).await;
    assert_eq!(st, StatusCode::CREATED, "{}", String::from_utf8_lossy(&b));
    let t: toml::Table = doc(&b);
    t["id"].as_integer().unwrap() as u64
}

async fn status(app: &Router, id: u64) -> StatusDoc {
    let (st, b) = call(app, "GET", &format!("/sessions/{id}/status"), "").await;
    assert_eq!(st, StatusCode::OK);
    doc(&b)
}

async fn wait_idle(app: &Router, id: u64) -> StatusDoc {
    for _ in 0..6000 {
        let s = status(app, id).await;
        assert!((0.0..=1.0).contains(&s.progress));
        if s.state == "idle" {
            return s;
        }
        tokio::time::sleep(Duration::from_millis(20)).await;
    }
    panic!("session {id} never became idle");
}

async fn post_seeds(app: &Router, id: u64, text: &str) -> SeedsDoc {
    let (st, b) = call(app, "POST", &format!("/sessions/{id}/seeds"), text).await;
    assert_eq!(st, StatusCode::OK, "{}", String::from_utf8_lossy(&b));
    doc(&b)
}

async fn run_iteration(app: &Router, id: u64) -> StatusDoc {
    let (st, b) = call(app, "POST", &format!("/sessions/{id}/iterate"), "").await;
    assert_eq!(st, StatusCode::ACCEPTED, "{}", String::from_utf8_lossy(&b));
    let s = wait_idle(app, id).await;
    assert_eq!(s.error, None);
    s
}

fn decode_png(bytes: &[u8]) -> (u32, u32, Vec<u8>) {
    let dec = png::Decoder::new(bytes);
    let mut reader = dec.read_info().unwrap();
    let mut buf = vec![0; reader.output_buffer_size()];
    let info = reader.next_frame(&mut buf).unwrap();
    assert_eq!(info.color_type, png::ColorType::Grayscale);
    buf.truncate(info.buffer_size());
    (info.width, info.height, buf)
}

fn save_to(dir: &Path, name: &str, vol: &VoxelVolume) -> String {
    let path = dir.join(name);
    save_volume(&path, vol).unwrap();
    path.to_str().unwrap().to_string()
}

fn f32_values(bytes: &[u8]) -> Vec<f64> {
    bytes
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64)
        .collect()
}

// ---------- sessions ----------

#[tokio::test]
async fn create_status_and_delete() {
    let app = app();
    let a = create(&app, SMALL).await;
    let b = create(&app, SMALL).await;
    assert_ne!(a, b);
    let s = status(&app, a).await;
    assert_eq!((s.state.as_str(), s.iteration, s.dims, s.seeds), ("idle", 0, [32; 3], 0));
    assert!(!s.confidence);

    let (st, _) = call(&app, "DELETE", &format!("/sessions/{a}"), "").await;
    assert_eq!(st, StatusCode::NO_CONTENT);
    let (st, body) = call(&app, "GET", &format!("/sessions/{a}/status"), "").await;
    assert_eq!(st, StatusCode::NOT_FOUND);
    assert_eq!(error_of(&body), "no_session");
    assert_eq!(status(&app, b).await.iteration, 0);
}

#[tokio::test]
async fn create_errors() {
    let app = app();
    let (st, body) = call(&app, "POST", "/sessions", "volume = \"/does/not/exist.raw\"\n").await;
    assert!(st.is_client_error());
    assert_eq!(error_of(&body), "io");
    let (st, body) = call(&app, "POST", "/sessions", "nonsense = [").await;
    assert_eq!(st, StatusCode::BAD_REQUEST);
    assert_eq!(error_of(&body), "bad_request");
    let (st, _) = call(&app, "POST", "/sessions", "").await;
    assert_eq!(st, StatusCode::BAD_REQUEST);
    let bad_params = format!("{SMALL}\n[params]\nlevels = 0\n");
    let (st, body) = call(&app, "POST", "/sessions", &bad_params).await;
    assert_eq!(st, StatusCode::BAD_REQUEST);
    assert_eq!(error_of(&body), "invalid_parameter");
}

#[tokio::test]
async fn create_from_volume_file() {
    let dir = tempfile::tempdir().unwrap();
    let vol = VoxelVolume::constant([6, 5, 4], Dtype::U8, 7.0).unwrap();
    let path = save_to(dir.path(), "seven.raw", &vol);
    let app = app();
    let id = create(&app, &format!("volume = {path:?}\n")).await;
    assert_eq!(status(&app, id).await.dims, [6, 5, 4]);

    // Gray slice of a constant volume is uniform.
    let (st, png) = call(&app, "GET", &format!("/sessions/{id}/slice?axis=y&index=2&layer=gray"), "").await;
    assert_eq!(st, StatusCode::OK);
    let (w, h, px) = decode_png(&png);
    assert_eq!((w, h), (6, 4));
    assert!(px.iter().all(|&p| p == 7));
    let (_, png) = call(&app, "GET", &format!("/sessions/{id}/slice?axis=x&index=0&min=0&max=14"), "").await;
    let (w, h, px) = decode_png(&png);
    assert_eq!((w, h), (5, 4));
    assert!(px.iter().all(|&p| p == 128));
}

// ---------- slices ----------

#[tokio::test]
async fn slice_errors_and_determinism() {
    let app = app();
    let id = create(&app, SMALL).await;
    let uri = |q: &str| format!("/sessions/{id}/slice?{q}");
    let (st, body) = call(&app, "GET", &uri("axis=z&index=3&layer=confidence"), "").await;
    assert_eq!(st, StatusCode::NOT_FOUND);
    assert_eq!(error_of(&body), "not_computed");
    let (st, body) = call(&app, "GET", &uri("axis=z&index=32"), "").await;
    assert_eq!(st, StatusCode::BAD_REQUEST);
    assert_eq!(error_of(&body), "out_of_bounds");
    let (st, _) = call(&app, "GET", &uri("axis=w&index=1"), "").await;
    assert_eq!(st, StatusCode::BAD_REQUEST);
    let (st, body) = call(&app, "GET", &uri("axis=z&index=1&min=5&max=5"), "").await;
    assert_eq!(st, StatusCode::BAD_REQUEST);
    assert_eq!(error_of(&body), "bad_request");

    let (_, a) = call(&app, "GET", &uri("axis=z&index=16"), "").await;
    let (_, b) = call(&app, "GET", &uri("axis=z&index=16"), "").await;
    assert_eq!(a, b);
    let (w, h, px) = decode_png(&a);
    assert_eq!((w, h), (32, 32));
    // Plate voxels are brighter than background on average.
    let mean = |r: std::ops::Range<usize>| r.clone().map(|i| px[i * 32 + 16] as f64).sum::<f64>() / r.len() as f64;
    assert!(mean(6..26) > mean(0..3) + 40.0);
}

#[test]
fn uncertainty_of_half_confidence_renders_white() {
    let dims = [5, 4, 3];
    let conf = VoxelVolume::from_samples(dims, Samples::U8(vec![50; 60])).unwrap();
    let unc = uncertainty_volume(&conf, 1.0).unwrap();
    for axis in [Axis::X, Axis::Y, Axis::Z] {
        let (w, h, values) = slice_values(&unc, axis, 1).unwrap();
        let (lo, hi) = default_window(Layer::Uncertainty, unc.dtype(), &values);
        let px = window_to_u8(&values, lo, hi).unwrap();
        assert_eq!(px.len(), w * h);
        assert!(px.iter().all(|&p| p == 255));
        let (_, _, decoded) = decode_png(&encode_png(w, h, &px));
        assert_eq!(decoded, px);
    }
}

// ---------- seeds ----------

#[tokio::test]
async fn seed_posting() {
    let app = app();
    let id = create(&app, SMALL).await;
    let r = post_seeds(&app, id, FOUR).await;
    assert_eq!((r.accepted, r.pending), (4, 4));
    assert!(r.rejected.is_empty());

    let r = post_seeds(&app, id, "0 0 0 +1\n16 16 16 +1\n16 16 16 -1\n10 10 16 +1\n40 1 1 -1\n").await;
    assert_eq!((r.accepted, r.pending), (1, 5));
    let codes: Vec<(usize, &str)> = r.rejected.iter().map(|x| (x.entry, x.code.as_str())).collect();
    assert_eq!(
        codes,
        vec![(0, "no_environment"), (2, "conflicting_seed"), (3, "duplicate"), (4, "out_of_bounds")]
    );

    let (st, body) = call(&app, "POST", &format!("/sessions/{id}/seeds"), "1 2 +1\n").await;
    assert_eq!(st, StatusCode::BAD_REQUEST);
    assert_eq!(error_of(&body), "seed_parse");

    let (st, text) = call(&app, "GET", &format!("/sessions/{id}/export?what=seeds"), "").await;
    assert_eq!(st, StatusCode::OK);
    let text = String::from_utf8(text).unwrap();
    assert_eq!(text, format!("{FOUR}16 16 16 +1\n"));
    assert_eq!(alseg::learner::emit_seeds(&parse_seeds(&text).unwrap()), text);
}

#[tokio::test]
async fn export_seeds_round_trips() {
    let app = app();
    let id = create(&app, SMALL).await;
    post_seeds(&app, id, FOUR).await;
    let (_, text) = call(&app, "GET", &format!("/sessions/{id}/export?what=seeds"), "").await;
    assert_eq!(text, FOUR.as_bytes());
    assert_eq!(parse_seeds(std::str::from_utf8(&text).unwrap()).unwrap().len(), 4);
}

// ---------- iterations ----------

#[tokio::test(flavor = "multi_thread", worker_threads = 2)]
async fn iteration_lifecycle() {
    let app = app();
    let id = create(&app, SMALL).await;
    let (st, body) = call(&app, "POST", &format!("/sessions/{id}/iterate"), "").await;
    assert_eq!(st, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(error_of(&body), "single_class");
    post_seeds(&app, id, "10 10 16 +1\n20 22 15 +1\n").await;
    let (st, body) = call(&app, "POST", &format!("/sessions/{id}/iterate"), "").await;
    assert_eq!(st, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(error_of(&body), "single_class");
    post_seeds(&app, id, "10 10 5 -1\n22 20 27 -1\n").await;

    let (st, _) = call(&app, "POST", &format!("/sessions/{id}/iterate"), "").await;
    assert_eq!(st, StatusCode::ACCEPTED);
    let (st, body) = call(&app, "POST", &format!("/sessions/{id}/iterate"), "").await;
    assert_eq!(st, StatusCode::CONFLICT);
    assert_eq!(error_of(&body), "busy");
    let (st, body) = call(&app, "POST", &format!("/sessions/{id}/seeds"), "16 16 16 +1\n").await;
    assert_eq!(st, StatusCode::CONFLICT);
    assert_eq!(error_of(&body), "busy");

    let s = wait_idle(&app, id).await;
    assert_eq!((s.iteration, s.seeds, s.pending), (1, 4, 0));
    assert!(s.confidence);
    assert_eq!(s.error, None);
    for layer in ["confidence", "uncertainty"] {
        let (st, png) = call(&app, "GET", &format!("/sessions/{id}/slice?axis=z&index=16&layer={layer}"), "").await;
        assert_eq!(st, StatusCode::OK);
        assert_eq!(decode_png(&png).2.len(), 32 * 32);
    }
}

#[tokio::test(flavor = "multi_thread", worker_threads = 2)]
async fn exports_are_consistent() {
    let dir = tempfile::tempdir().unwrap();
    let app = app();
    let id = create(&app, SMALL).await;
    let (st, body) = call(&app, "GET", &format!("/sessions/{id}/export?what=model"), "").await;
    assert_eq!(st, StatusCode::NOT_FOUND);
    assert_eq!(error_of(&body), "not_computed");
    post_seeds(&app, id, FOUR).await;
    run_iteration(&app, id).await;

    let get = |what: &str| {
        let (app, uri) = (app.clone(), format!("/sessions/{id}/export?{what}"));
        async move { call(&app, "GET", &uri, "").await }
    };
    let (st, model) = get("what=model").await;
    assert_eq!(st, StatusCode::OK);
    let (model, training) = model_from_bytes(&model).unwrap();
    assert_eq!(training.len(), 4);
    let (_, conf) = get("what=confidence").await;
    let (_, desc) = get("what=confidence&part=descriptor").await;

    // The exported model reproduces the exported confidence volume.
    let volume = make_phantom(&toml::from_str::<toml::Table>(SMALL).unwrap()["phantom"].clone().try_into().unwrap())
        .unwrap()
        .volume;
    let (offline, _) = classify_volume(&volume, &model, None, &ClassifyOptions::default()).unwrap();
    assert_eq!(offline.to_samples().unwrap().to_le_bytes(), conf);

    // The confidence export loads as a volume and feeds the evaluation.
    std::fs::write(dir.path().join("conf.raw"), &conf).unwrap();
    std::fs::write(dir.path().join("conf.toml"), &desc).unwrap();
    let loaded = open_volume(&dir.path().join("conf.raw"), &LoadOptions::default()).unwrap();
    assert_eq!(loaded.dtype(), Dtype::U8);
    let seg = threshold(&loaded, 50).unwrap();
    let report = metrics(&seg, &seg).unwrap();
    assert_eq!(report.iou, 1.0);

    let (_, unc) = get("what=uncertainty").await;
    assert_eq!(unc.len(), 4 * 32 * 32 * 32);
    let (st, _) = get("what=model&level=2").await;
    assert_eq!(st, StatusCode::BAD_REQUEST);
    let (st, _) = get("what=everything").await;
    assert_eq!(st, StatusCode::BAD_REQUEST);
}

#[tokio::test(flavor = "multi_thread", worker_threads = 2)]
async fn failed_training_keeps_pending_seeds() {
    let app = app();
    let id = create(&app, &format!("{SMALL}\n[params.train]\nfolds = 1\n")).await;
    post_seeds(&app, id, FOUR).await;
    let (st, _) = call(&app, "POST", &format!("/sessions/{id}/iterate"), "").await;
    assert_eq!(st, StatusCode::ACCEPTED);
    let s = wait_idle(&app, id).await;
    assert_eq!((s.iteration, s.seeds, s.pending), (0, 0, 4));
    assert!(s.error_code.is_some() && s.error.is_some());
    assert!(!s.confidence);
}

#[tokio::test(flavor = "multi_thread", worker_threads = 2)]
async fn checkpoint_restore_reproduces_slices() {
    let dir = tempfile::tempdir().unwrap();
    let ckpt = dir.path().join("ckpt");
    let app = app();
    let id = create(&app, SMALL).await;
    post_seeds(&app, id, FOUR).await;
    run_iteration(&app, id).await;
    let body = format!("dir = {:?}\n", ckpt.to_str().unwrap());
    let (st, b) = call(&app, "POST", &format!("/sessions/{id}/checkpoint"), &body).await;
    assert_eq!(st, StatusCode::OK, "{}", String::from_utf8_lossy(&b));

    // A fresh server restores the checkpoint.
    let other = crate::app();
    let restore = format!("checkpoint = {:?}\n{SMALL}", ckpt.to_str().unwrap());
    let restored = create(&other, &restore).await;
    let s = wait_idle(&other, restored).await;
    assert_eq!((s.iteration, s.seeds), (1, 4));
    for q in ["layer=confidence&axis=z&index=16", "layer=uncertainty&axis=x&index=9&min=0&max=0.5"] {
        let (_, a) = call(&app, "GET", &format!("/sessions/{id}/slice?{q}"), "").await;
        let (_, b) = call(&other, "GET", &format!("/sessions/{restored}/slice?{q}"), "").await;
        assert_eq!(a, b, "{q}");
    }
}

#[tokio::test(flavor = "multi_thread", worker_threads = 4)]
async fn scripted_rounds_reduce_mean_uncertainty() {
    let dir = tempfile::tempdir().unwrap();
    let ph = make_phantom(&plate_phantom(1)).unwrap();
    let truth = BinaryVolume::from_bools(ph.volume.dims(), &ph.foreground()).unwrap();
    let path = save_to(dir.path(), "plate.raw", &ph.volume);
    let app = router(AppState::new(ServerConfig {
        workers: 4,
        ..Default::default()
    }));
    let id = create(&app, &format!("volume = {path:?}\n")).await;
    let mut means = Vec::new();
    for round in &PLATE_SCHEDULE {
        let text = alseg::learner::emit_seeds(&label_from_truth(round, &truth));
        assert_eq!(post_seeds(&app, id, &text).await.accepted, 10);
        run_iteration(&app, id).await;
        let (_, unc) = call(&app, "GET", &format!("/sessions/{id}/export?what=uncertainty"), "").await;
        let u = f32_values(&unc);
        means.push(u.iter().sum::<f64>() / u.len() as f64);
    }
    assert_eq!(status(&app, id).await.iteration, 4);
    assert!(means[3] < means[0], "mean uncertainty per round {means:?}");
}
