mod common;

use axum::http::StatusCode;
use common::*;
use insightkg::pipeline::run_all;
use insightkg::server::AppState;
use insightkg::KgStore;

fn golden() -> Vec<u8> {
    std::fs::read(seven_papers("kg_inheritance.golden.json")).unwrap()
}

#[tokio::test]
async fn seven_paper_graph_is_served_byte_for_byte() {
    let dir = tempfile::tempdir().unwrap();
    seven_papers_out(dir.path());
    let app = app(dir.path());
    let (status, body) = get(&app, "/kg/inheritance").await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(body, golden());
    let (_, explicit) = get(&app, "/kg/inheritance?N=1&M=2&T=3").await;
    assert_eq!(explicit, golden());
    assert!(schema_errors(&kg_validator(), &json(&body)).is_empty());
}

#[tokio::test]
async fn other_params_rebuild_the_graph() {
    let dir = tempfile::tempdir().unwrap();
    seven_papers_out(dir.path());
    let app = app(dir.path());
    let (status, body) = get(&app, "/kg/inheritance?M=1&T=2").await;
    assert_eq!(status, StatusCode::OK);
    let kg = json(&body);
    assert!(schema_errors(&kg_validator(), &kg).is_empty());
    assert_eq!(kg["params"]["M"], 1);
    assert_eq!(kg["params"]["N"], 1);
    assert_eq!(kg["nodes"].as_array().unwrap().len(), 2);
    // Served again from the cache.
    assert_eq!(get(&app, "/kg/inheritance?M=1&T=2").await.1, body);
    // Unknown parameters are ignored.
    assert_eq!(get(&app, "/kg/inheritance?M=1&T=2&colour=red").await.1, body);
}

#[tokio::test]
async fn invalid_params_are_rejected_with_the_field() {
    let dir = tempfile::tempdir().unwrap();
    seven_papers_out(dir.path());
    let app = app(dir.path());
    for (uri, field) in [
        ("/kg/inheritance?N=0", "N"),
        ("/kg/inheritance?M=-1", "M"),
        ("/kg/inheritance?T=abc", "T"),
        ("/kg/inheritance?T=2.5", "T"),
        ("/kg/citations", "kind"),
        ("/paper/abc", "id"),
        ("/matrix/row/-4", "id"),
    ] {
        let (status, body) = get(&app, uri).await;
        assert_eq!(status, StatusCode::BAD_REQUEST, "{uri}");
        let err = json(&body);
        assert_eq!(err["field"], field, "{uri}");
        assert!(err["error"].as_str().is_some_and(|s| !s.is_empty()));
    }
}

#[tokio::test]
async fn unknown_papers_are_not_found() {
    let dir = tempfile::tempdir().unwrap();
    seven_papers_out(dir.path());
    let app = app(dir.path());
    for uri in ["/paper/999", "/paper/50", "/matrix/row/1", "/kg/relevance"] {
        let (status, body) = get(&app, uri).await;
        assert_eq!(status, StatusCode::NOT_FOUND, "{uri}");
        assert!(json(&body)["error"].is_string());
    }
}

#[tokio::test]
async fn paper_details() {
    let dir = tempfile::tempdir().unwrap();
    seven_papers_out(dir.path());
    let app = app(dir.path());
    let (status, body) = get(&app, "/paper/1").await;
    assert_eq!(status, StatusCode::OK);
    let p = json(&body);
    assert_eq!(p["id"], 1);
    assert_eq!(p["cited_by_count"], 4);
    assert!(p["title"].as_str().unwrap().starts_with("HotpotQA"));
    assert_eq!(p["keywords"].as_array().unwrap().len(), 5);
    assert!(p["resolved_text"].as_str().unwrap().contains("supporting facts"));
    assert_eq!(json(&get(&app, "/paper/7").await.1)["cited_by_count"], 0);
}

#[tokio::test]
async fn synthetic_run_serves_both_kinds() {
    let dir = tempfile::tempdir().unwrap();
    run_all(&synth_config(dir.path())).unwrap();
    let app = app(dir.path());
    let validator = kg_validator();
    for uri in [
        "/kg/inheritance",
        "/kg/relevance",
        "/kg/relevance?N=1&M=4&T=2",
        "/kg/inheritance?N=20&M=20&T=20",
    ] {
        let (status, body) = get(&app, uri).await;
        assert_eq!(status, StatusCode::OK, "{uri}");
        let errors = schema_errors(&validator, &json(&body));
        assert!(errors.is_empty(), "{uri}: {errors:?}");
    }

    let (status, body) = get(&app, "/matrix/row/101").await;
    assert_eq!(status, StatusCode::OK);
    let row = json(&body);
    let scores = row["scores"].as_array().unwrap();
    assert_eq!(scores.len(), 19);
    let ids: Vec<u64> = scores.iter().map(|s| s["id"].as_u64().unwrap()).collect();
    assert!(ids.windows(2).all(|w| w[0] < w[1]) && !ids.contains(&101));

    let meta = json(&get(&app, "/meta").await.1);
    assert_eq!(meta["papers"], 20);
    assert_eq!(meta["dropped_citation_count"], 4);
    assert_eq!(meta["config_hash"].as_str().unwrap().len(), 64);
    assert_eq!(meta["forests"]["relevance"]["params"]["N"], 3);
}

#[test]
fn snapshot_replacement_keeps_old_readers_valid() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    seven_papers_out(a.path());
    run_all(&synth_config(b.path())).unwrap();
    let state = AppState::new(KgStore::load(a.path()).unwrap());
    let old = state.snapshot();
    state.replace(KgStore::load(b.path()).unwrap());
    assert_eq!(old.meta().papers, 7);
    assert_eq!(state.snapshot().meta().papers, 20);
}
