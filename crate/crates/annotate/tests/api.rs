use std::path::Path;

use axum::body::Body;
use axum::http::{Request, StatusCode};
use axum::Router;
use http_body_util::BodyExt;
use plothole::inject::{ContinuityRecord, Problem, UnresolvedRecord};
use plothole::jsonl::write_jsonl;
use plothole_annotate::{human_baselines, router, AnswerStore, AppState, HumanReport, Study};
use serde_json::{json, Value};
use tower::ServiceExt;

const N: usize = 10;
const N_SENTENCES: usize = 6;

fn continuity_label(i: usize) -> usize {
    (i * 7 + 3) % N_SENTENCES
}

/// Dyadic so that squared errors are exact.
fn unresolved_label(i: usize) -> f64 {
    (i % 4) as f64 / 8.0
}

fn write_datasets(dir: &Path) {
    let cont: Vec<ContinuityRecord> = (0..N)
        .map(|i| ContinuityRecord {
            story_id: format!("s{i}"),
            sentences: (0..N_SENTENCES).map(|k| format!("Story {i} sentence {k}.")).collect(),
            label_index: continuity_label(i),
            original_sentence: format!("SECRET original {i}."),
        })
        .collect();
    let unres: Vec<UnresolvedRecord> = (0..N)
        .map(|i| UnresolvedRecord {
            story_id: format!("s{i}"),
            sentences: (0..4).map(|k| format!("Prefix {i} sentence {k}.")).collect(),
            label_fraction: unresolved_label(i),
            removed_count: 1,
            source_length: 8,
        })
        .collect();
    write_jsonl(&dir.join("continuity_test.jsonl"), None, &cont).unwrap();
    write_jsonl(&dir.join("unresolved_test.jsonl"), None, &unres).unwrap();
}

struct Fixture {
    dir: tempfile::TempDir,
}

impl Fixture {
    fn new() -> Self {
        let dir = tempfile::tempdir().unwrap();
        write_datasets(dir.path());
        Self { dir }
    }

    fn answers(&self) -> std::path::PathBuf {
        self.dir.path().join("answers/answers.jsonl")
    }

    fn app(&self) -> Router {
        let study = Study::from_datasets(self.dir.path(), N, 0).unwrap();
        let store = AnswerStore::open(&self.answers()).unwrap();
        let mut state = AppState::new(study, store);
        state.clock = || 1_700_000_000;
        router(state, None)
    }
}

async fn call(app: &Router, req: Request<Body>) -> (StatusCode, String) {
    let res = app.clone().oneshot(req).await.unwrap();
    let status = res.status();
    let bytes = res.into_body().collect().await.unwrap().to_bytes();
    (status, String::from_utf8(bytes.to_vec()).unwrap())
}

async fn get(app: &Router, uri: &str) -> (StatusCode, String) {
    call(app, Request::get(uri).body(Body::empty()).unwrap()).await
}

async fn post(app: &Router, uri: &str, body: Value) -> (StatusCode, String) {
    let req = Request::post(uri).header("content-type", "application/json").body(Body::from(body.to_string())).unwrap();
    call(app, req).await
}

async fn next(app: &Router, problem: &str, annotator: &str) -> Option<Value> {
    let (status, body) = get(app, &format!("/api/tasks/next?problem={problem}&annotator={annotator}")).await;
    match status {
        StatusCode::OK => Some(serde_json::from_str(&body).unwrap()),
        StatusCode::NO_CONTENT => None,
        s => panic!("unexpected {s}: {body}"),
    }
}

async fn report(app: &Router) -> HumanReport {
    let (status, body) = get(app, "/api/report").await;
    assert_eq!(status, StatusCode::OK);
    serde_json::from_str(&body).unwrap()
}

fn index_of(task: &Value) -> usize {
    task["story_id"].as_str().unwrap()[1..].parse().unwrap()
}

#[tokio::test]
async fn queue_advances_then_reports_done() {
    let f = Fixture::new();
    let app = f.app();
    let mut seen = Vec::new();
    while let Some(task) = next(&app, "continuity", "ann").await {
        assert_eq!(task["problem"], "continuity");
        let id = task["task_id"].as_str().unwrap().to_string();
        assert!(!seen.contains(&id), "task {id} served twice");
        let (status, _) = post(&app, &format!("/api/tasks/{id}/answer"), json!({"annotator_id": "ann", "sentence_index": 0})).await;
        assert_eq!(status, StatusCode::OK);
        seen.push(id);
    }
    assert_eq!(seen.len(), N);
    // Another annotator starts from the beginning.
    assert_eq!(next(&app, "continuity", "other").await.unwrap()["task_id"], "continuity-s0");
}

#[tokio::test]
async fn invalid_requests_are_rejected() {
    let f = Fixture::new();
    let app = f.app();
    let ok = |s: StatusCode| s.is_client_error();
    let cases = [
        ("continuity-s0", json!({"annotator_id": "a", "sentence_index": N_SENTENCES}), StatusCode::UNPROCESSABLE_ENTITY),
        ("continuity-s0", json!({"annotator_id": "a", "fraction": 0.5}), StatusCode::UNPROCESSABLE_ENTITY),
        ("continuity-s0", json!({"annotator_id": "", "sentence_index": 1}), StatusCode::UNPROCESSABLE_ENTITY),
        ("unresolved-s0", json!({"annotator_id": "a", "fraction": 1.5}), StatusCode::UNPROCESSABLE_ENTITY),
        ("unresolved-s0", json!({"annotator_id": "a", "fraction": -0.1}), StatusCode::UNPROCESSABLE_ENTITY),
        ("unresolved-s0", json!({"annotator_id": "a", "sentence_index": 1}), StatusCode::UNPROCESSABLE_ENTITY),
        ("unresolved-s0", json!({"annotator_id": "a", "fraction": 0.1, "extra": 1}), StatusCode::UNPROCESSABLE_ENTITY),
        ("unresolved-s0", json!({"fraction": 0.1}), StatusCode::UNPROCESSABLE_ENTITY),
        ("nope", json!({"annotator_id": "a", "sentence_index": 1}), StatusCode::NOT_FOUND),
    ];
    for (id, body, want) in cases {
        let (status, text) = post(&app, &format!("/api/tasks/{id}/answer"), body.clone()).await;
        assert_eq!(status, want, "{id} {body}: {text}");
        assert!(ok(status));
        assert!(serde_json::from_str::<Value>(&text).unwrap()["error"].is_string());
    }
    for uri in ["/api/tasks/next?problem=bogus&annotator=a", "/api/tasks/next?problem=continuity", "/api/tasks/next?annotator=a"] {
        assert_eq!(get(&app, uri).await.0, StatusCode::BAD_REQUEST, "{uri}");
    }
    assert!(report(&app).await.empty, "rejected answers must not be stored");
}

#[tokio::test]
async fn resubmission_overwrites() {
    let f = Fixture::new();
    let app = f.app();
    let uri = "/api/tasks/continuity-s0/answer";
    let right = continuity_label(0);
    let wrong = (right + 1) % N_SENTENCES;
    post(&app, uri, json!({"annotator_id": "a", "sentence_index": wrong})).await;
    assert_eq!(report(&app).await.f1, Some(0.0));
    post(&app, uri, json!({"annotator_id": "a", "sentence_index": right})).await;
    let r = report(&app).await;
    assert_eq!((r.f1, r.n_answers, r.n_tasks), (Some(1.0), 1, 1));
}

#[tokio::test]
async fn half_correct_gives_f1_one_half() {
    let f = Fixture::new();
    let app = f.app();
    for i in 0..N {
        let l = continuity_label(i);
        let answer = if i % 2 == 0 { l } else { (l + 1) % N_SENTENCES };
        let (status, _) =
            post(&app, &format!("/api/tasks/continuity-s{i}/answer"), json!({"annotator_id": "a", "sentence_index": answer})).await;
        assert_eq!(status, StatusCode::OK);
    }
    let r = report(&app).await;
    assert_eq!(r.f1, Some(0.5));
    assert_eq!(r.mse, None);
    assert_eq!((r.n_tasks, r.n_annotators, r.n_answers), (N, 1, N));
    let b = human_baselines(&r);
    assert_eq!(b[&Problem::Continuity].value, 0.5);
    assert!(!b.contains_key(&Problem::Unresolved));
}

#[tokio::test]
async fn unresolved_mse_matches_hand_values() {
    let f = Fixture::new();
    let app = f.app();
    for i in 0..N {
        post(&app, &format!("/api/tasks/unresolved-s{i}/answer"), json!({"annotator_id": "exact", "fraction": unresolved_label(i)})).await;
        post(&app, &format!("/api/tasks/unresolved-s{i}/answer"), json!({"annotator_id": "off", "fraction": 0.5})).await;
    }
    let r = report(&app).await;
    let by = |id: &str| r.per_annotator.iter().find(|a| a.annotator_id == id).unwrap().mse.unwrap();
    assert_eq!(by("exact"), 0.0);
    // Labels cycle 0, 1/8, 2/8, 3/8: errors 4/8, 3/8, 2/8, 1/8 over s0..s9.
    let hand = (0..N).map(|i| (0.5 - unresolved_label(i)).powi(2)).sum::<f64>() / N as f64;
    assert_eq!(hand, (3.0 * 16.0 + 3.0 * 9.0 + 2.0 * 4.0 + 2.0 * 1.0) / 64.0 / 10.0);
    assert_eq!(by("off"), hand);
    assert_eq!(r.mse, Some(hand / 2.0));
    assert_eq!((r.n_tasks, r.n_annotators), (N, 2));
}

#[tokio::test]
async fn labels_never_reach_clients() {
    let f = Fixture::new();
    let app = f.app();
    let mut bodies = Vec::new();
    for problem in ["continuity", "unresolved"] {
        while let Some(task) = next(&app, problem, "a").await {
            bodies.push(task.to_string());
            let id = task["task_id"].as_str().unwrap();
            let answer = if problem == "continuity" { json!({"annotator_id": "a", "sentence_index": 0}) } else { json!({"annotator_id": "a", "fraction": 0.0}) };
            bodies.push(post(&app, &format!("/api/tasks/{id}/answer"), answer).await.1);
            assert!(task.as_object().unwrap().keys().all(|k| ["task_id", "problem", "story_id", "sentences"].contains(&k.as_str())));
            assert_eq!(task["sentences"].as_array().unwrap().len(), if problem == "continuity" { N_SENTENCES } else { 4 }, "{}", index_of(&task));
        }
    }
    bodies.push(get(&app, "/api/report").await.1);
    for b in &bodies {
        for needle in ["label", "SECRET", "original_sentence", "removed_count", "source_length"] {
            assert!(!b.contains(needle), "{needle} leaked in {b}");
        }
    }
}

#[tokio::test]
async fn answers_survive_restart_bit_exactly() {
    let f = Fixture::new();
    let fractions = [0.1, 1.0 / 3.0, std::f64::consts::FRAC_1_SQRT_2 - 0.5, 5e-324, 0.30000000000000004];
    {
        let app = f.app();
        for (i, x) in fractions.iter().enumerate() {
            post(&app, &format!("/api/tasks/unresolved-s{i}/answer"), json!({"annotator_id": "a", "fraction": x})).await;
        }
        post(&app, "/api/tasks/continuity-s0/answer", json!({"annotator_id": "a", "sentence_index": 2})).await;
        post(&app, "/api/tasks/continuity-s0/answer", json!({"annotator_id": "a", "sentence_index": 4})).await;
    }
    let before = std::fs::read(f.answers()).unwrap();
    let store = AnswerStore::open(&f.answers()).unwrap();
    assert_eq!(store.answers().len(), fractions.len() + 1);
    for (i, x) in fractions.iter().enumerate() {
        let a = &store.answers()[&(format!("unresolved-s{i}"), "a".to_string())];
        assert_eq!(serde_json::to_value(a.answer).unwrap()["fraction"].as_f64().unwrap().to_bits(), x.to_bits());
        assert_eq!(a.timestamp, 1_700_000_000);
    }
    let c = &store.answers()[&("continuity-s0".to_string(), "a".to_string())];
    assert_eq!(serde_json::to_value(c.answer).unwrap()["sentence_index"], 4);
    // After restart the queue resumes past answered tasks.
    let app = f.app();
    assert_eq!(next(&app, "continuity", "a").await.unwrap()["task_id"], "continuity-s1");
    assert_eq!(next(&app, "unresolved", "a").await.unwrap()["task_id"], format!("unresolved-s{}", fractions.len()));
    assert_eq!(std::fs::read(f.answers()).unwrap(), before, "reading must not rewrite the log");
}

#[test]
fn missing_dataset_is_fatal() {
    let dir = tempfile::tempdir().unwrap();
    assert!(Study::from_datasets(dir.path(), N, 0).is_err());
}

#[tokio::test]
async fn busy_port_is_fatal() {
    let f = Fixture::new();
    let taken = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
    let config = plothole_annotate::ServeConfig {
        host: "127.0.0.1".into(),
        port: taken.local_addr().unwrap().port(),
        datasets: f.dir.path().to_path_buf(),
        answers: f.answers(),
        n_tasks: N,
        seed: 0,
        static_dir: None,
    };
    let err = plothole_annotate::serve(config).await.unwrap_err();
    assert!(matches!(err, plothole_annotate::AnnotateError::Bind { .. }), "{err}");
}

#[tokio::test]
async fn serves_static_files() {
    let f = Fixture::new();
    let ui = f.dir.path().join("ui");
    std::fs::create_dir_all(&ui).unwrap();
    std::fs::write(ui.join("index.html"), "<html>ui</html>").unwrap();
    let study = Study::from_datasets(f.dir.path(), N, 0).unwrap();
    let app = router(AppState::new(study, AnswerStore::open(&f.answers()).unwrap()), Some(ui));
    let (status, body) = get(&app, "/index.html").await;
    assert_eq!((status, body.as_str()), (StatusCode::OK, "<html>ui</html>"));
    assert_eq!(get(&app, "/api/report").await.0, StatusCode::OK);
}

#[test]
fn sample_is_seeded_and_ordered() {
    let f = Fixture::new();
    let ids = |seed| {
        let s = Study::from_datasets(f.dir.path(), 4, seed).unwrap();
        s.tasks(Problem::Continuity).iter().map(|t| index_of(&serde_json::to_value(&t.task).unwrap())).collect::<Vec<_>>()
    };
    let a = ids(1);
    assert_eq!(a, ids(1));
    assert_eq!(a.len(), 4);
    assert!(a.windows(2).all(|w| w[0] < w[1]));
}

#[tokio::test]
async fn perfect_annotator_and_empty_report() {
    let f = Fixture::new();
    let app = f.app();
    let r = report(&app).await;
    assert!(r.empty);
    assert_eq!((r.f1, r.mse, r.n_tasks, r.n_annotators), (None, None, 0, 0));
    for i in 0..N {
        post(&app, &format!("/api/tasks/continuity-s{i}/answer"), json!({"annotator_id": "a", "sentence_index": continuity_label(i)})).await;
    }
    let r = report(&app).await;
    assert!(!r.empty);
    assert_eq!(r.f1, Some(1.0));
}

#[tokio::test]
async fn stored_verbatim_and_scored_like_the_experiment_metrics() {
    use plothole::experiment::metrics::mse_unresolved;
    let f = Fixture::new();
    let app = f.app();
    let (status, body) = post(&app, "/api/tasks/unresolved-s1/answer", json!({"annotator_id": "a", "fraction": 0.07})).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(serde_json::from_str::<Value>(&body).unwrap(), json!({"task_id": "unresolved-s1", "annotator_id": "a", "stored": true}));
    let line = std::fs::read_to_string(f.answers()).unwrap();
    assert!(line.contains("\"fraction\":0.07,"), "{line}");
    let r = report(&app).await;
    assert_eq!(r.mse, Some(mse_unresolved(&[0.07], &[unresolved_label(1)]).unwrap()));
}

#[tokio::test(flavor = "multi_thread", worker_threads = 4)]
async fn concurrent_submissions_are_all_stored() {
    let f = Fixture::new();
    let app = f.app();
    let mut handles = Vec::new();
    for a in 0..8 {
        for i in 0..N {
            let app = app.clone();
            handles.push(tokio::spawn(async move {
                let uri = format!("/api/tasks/continuity-s{i}/answer");
                post(&app, &uri, json!({"annotator_id": format!("ann{a}"), "sentence_index": continuity_label(i)})).await.0
            }));
        }
    }
    for h in handles {
        assert_eq!(h.await.unwrap(), StatusCode::OK);
    }
    let r = report(&app).await;
    assert_eq!((r.n_answers, r.n_annotators, r.f1), (8 * N, 8, Some(1.0)));
    let lines = std::fs::read_to_string(f.answers()).unwrap();
    assert_eq!(lines.lines().count(), 8 * N);
    assert!(lines.lines().all(|l| serde_json::from_str::<Value>(l).is_ok()), "interleaved writes");
}
