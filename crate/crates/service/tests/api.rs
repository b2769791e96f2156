use std::collections::{BTreeSet, HashSet};
use std::sync::Arc;

use axum::body::Body;
use axum::http::{Request, StatusCode};
use axum::Router;
use gemlab_core::abduction::generate_candidates;
use gemlab_core::campaign::{run_campaign, CampaignConfig, Source};
use gemlab_core::engine::{compile_with_environment, fact_id};
use gemlab_core::facts::{parse_environment, parse_model};
use gemlab_core::fixtures::{T1_DELETED, T1_ENV, T1_INCOMPLETE_MODEL};
use gemlab_core::selection::{select_trial, Strategy};
use gemlab_core::synth::{generate, observable_deletion, SynthParams};
use gemlab_service::{router, Store};
use http_body_util::BodyExt;
use serde_json::{json, Value};
use tower::ServiceExt;

async fn call(app: &Router, method: &str, uri: &str, body: Option<Value>) -> (StatusCode, Value) {
    let (status, text) = call_text(app, method, uri, body).await;
    (status, serde_json::from_str(&text).unwrap_or(Value::Null))
}

async fn call_text(app: &Router, method: &str, uri: &str, body: Option<Value>) -> (StatusCode, String) {
    let req = Request::builder().method(method).uri(uri).header("content-type", "application/json");
    let req = match body {
        Some(b) => req.body(Body::from(b.to_string())).unwrap(),
        None => req.body(Body::empty()).unwrap(),
    };
    let res = app.clone().oneshot(req).await.unwrap();
    let status = res.status();
    let bytes = res.into_body().collect().await.unwrap().to_bytes();
    (status, String::from_utf8(bytes.to_vec()).unwrap())
}

fn app_in(dir: &std::path::Path) -> Router {
    router(Arc::new(Store::open(dir, 1).unwrap()))
}

async fn seed_t1(app: &Router) {
    let (s, _) = call(app, "POST", "/models", Some(json!({"name": "t1_incomplete.gem", "content": T1_INCOMPLETE_MODEL}))).await;
    assert_eq!(s, StatusCode::CREATED);
    let (s, _) = call(app, "POST", "/environments", Some(json!({"name": "t1.env", "content": T1_ENV}))).await;
    assert_eq!(s, StatusCode::CREATED);
}

fn external_t1() -> Value {
    json!({"model": "t1_incomplete.gem", "environment": "t1.env", "strategy": "ase", "mode": "external"})
}

fn outcome(gene: &str, medium: &str, phenotype: &str) -> Value {
    json!({"trial": {"gene": gene, "medium": medium}, "phenotype": phenotype})
}

#[tokio::test]
async fn external_t1_campaign_end_to_end() {
    let dir = tempfile::tempdir().unwrap();
    let app = app_in(dir.path());
    seed_t1(&app).await;

    let (s, c) = call(&app, "POST", "/campaigns", Some(external_t1())).await;
    assert_eq!(s, StatusCode::CREATED);
    assert_eq!(c["status"], "awaiting_outcome");
    assert_eq!(c["alive_count"], 3);

    let model = parse_model(T1_INCOMPLETE_MODEL).unwrap();
    let env = parse_environment(T1_ENV).unwrap();
    let compiled = compile_with_environment(&model, &env).unwrap();
    let space = generate_candidates(&compiled, None);
    let expected = select_trial(Strategy::Ase, &compiled.design_space(), &HashSet::new(), &space, &compiled, &env, 1).unwrap().unwrap();
    let suggestion = &c["suggestion"];
    assert_eq!(suggestion["trial"], json!({"gene": "g2", "medium": "M_A"}));
    assert_eq!(suggestion["trial"], serde_json::to_value(&expected.trial).unwrap());
    assert_eq!(suggestion["eig_bits"].as_f64().unwrap(), expected.eig_bits);
    assert_eq!(suggestion["cost"], "3.00");

    let id = c["id"].as_str().unwrap().to_string();
    let (s, c) = call(&app, "POST", &format!("/campaigns/{id}/outcome"), Some(outcome("g2", "M_A", "no_growth"))).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!((c["last_step"]["alive_before"].as_u64(), c["last_step"]["alive_count"].as_u64()), (Some(3), Some(2)));
    assert_eq!(c["suggestion"]["trial"], json!({"gene": "g2", "medium": "M_B"}));
    assert_eq!(c["suggestion"]["eig_bits"], 1.0);

    let (s, h) = call(&app, "GET", &format!("/campaigns/{id}/hypotheses"), None).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!((h["alive_count"].as_u64(), h["refuted_count"].as_u64()), (Some(2), Some(1)));
    let refuted: Vec<&Value> = h["hypotheses"].as_array().unwrap().iter().filter(|e| e["status"] == "refuted").collect();
    assert_eq!(refuted.len(), 1);
    assert_eq!(refuted[0]["refuted_by"], outcome("g2", "M_A", "no_growth"));
    assert_eq!(refuted[0]["refuted_at_step"], 1);
    assert_eq!(h["hypotheses"][0]["rank"], 1);

    let (s, e) = call(&app, "POST", &format!("/campaigns/{id}/outcome"), Some(outcome("g1", "M_B", "no_growth"))).await;
    assert_eq!(s, StatusCode::CONFLICT);
    assert_eq!(e["error"], "trial_mismatch");

    let (s, e) = call(&app, "POST", &format!("/campaigns/{id}/outcome"), Some(outcome("g2", "M_B", "maybe"))).await;
    assert_eq!(s, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(e["error"], "unknown_phenotype");

    let (s, c) = call(&app, "POST", &format!("/campaigns/{id}/outcome"), Some(outcome("g2", "M_B", "no_growth"))).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(c["status"], "done");
    assert_eq!(c["alive_count"], 1);
    assert_eq!(c["recovered"], T1_DELETED);
    assert_eq!(c["cumulative_cost"], "9.00");
    assert_eq!(c["suggestion"], Value::Null);

    let (s, e) = call(&app, "POST", &format!("/campaigns/{id}/outcome"), Some(outcome("g2", "M_B", "no_growth"))).await;
    assert_eq!(s, StatusCode::GONE);
    assert_eq!(e["error"], "campaign_terminal");

    let (s, csv) = call_text(&app, "GET", &format!("/campaigns/{id}/metrics"), None).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(
        csv,
        "step,strategy,seed,cost,cumulative_cost,log10_cumulative_cost,alive,accuracy\n\
         0,ase,,0.00,0.00,,3,\n\
         1,ase,,3.00,3.00,0.477121,2,\n\
         2,ase,,6.00,9.00,0.954243,1,\n"
    );

    let (s, list) = call(&app, "GET", "/campaigns", None).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(list.as_array().unwrap().len(), 1);
}

#[tokio::test]
async fn fresh_campaign_lists_every_candidate_alive() {
    let dir = tempfile::tempdir().unwrap();
    let app = app_in(dir.path());
    seed_t1(&app).await;
    let (_, c) = call(&app, "POST", "/campaigns", Some(external_t1())).await;
    let (_, h) = call(&app, "GET", &format!("/campaigns/{}/hypotheses", c["id"].as_str().unwrap()), None).await;
    let ids: BTreeSet<&str> = h["hypotheses"].as_array().unwrap().iter().map(|e| e["id"].as_str().unwrap()).collect();
    assert_eq!(ids, BTreeSet::from(["codes(g1,e2)", "codes(g2,e1)", "codes(g2,e2)"]));
    assert!(h["hypotheses"].as_array().unwrap().iter().all(|e| e["status"] == "alive"));
}

#[tokio::test]
async fn oracle_campaign_runs_to_completion() {
    let dir = tempfile::tempdir().unwrap();
    let app = app_in(dir.path());
    seed_t1(&app).await;
    let body = json!({"model": "t1_incomplete.gem", "environment": "t1.env", "mode": "oracle", "deleted": [T1_DELETED]});
    let (s, c) = call(&app, "POST", "/campaigns", Some(body)).await;
    assert_eq!(s, StatusCode::CREATED);
    assert_eq!(c["status"], "done");
    assert_eq!(c["accuracy"], 1.0);
    assert_eq!(c["steps"], 2);
}

#[tokio::test]
async fn request_errors_map_to_statuses() {
    let dir = tempfile::tempdir().unwrap();
    let app = app_in(dir.path());
    seed_t1(&app).await;

    let (s, e) = call(&app, "POST", "/campaigns", Some(json!({"model": "nope.gem", "environment": "t1.env"}))).await;
    assert_eq!((s, e["error"].as_str()), (StatusCode::NOT_FOUND, Some("not_found")));
    let (s, _) = call(&app, "GET", "/campaigns/c999999", None).await;
    assert_eq!(s, StatusCode::NOT_FOUND);
    let (s, _) = call(&app, "GET", "/campaigns/c999999/hypotheses", None).await;
    assert_eq!(s, StatusCode::NOT_FOUND);
    let (s, _) = call(&app, "POST", "/campaigns/c999999/outcome", Some(outcome("g2", "M_A", "growth"))).await;
    assert_eq!(s, StatusCode::NOT_FOUND);

    let mut bad = external_t1();
    bad["strategy"] = json!("greedy");
    let (s, e) = call(&app, "POST", "/campaigns", Some(bad)).await;
    assert_eq!((s, e["error"].as_str()), (StatusCode::BAD_REQUEST, Some("invalid_request")));
    let (s, _) = call(&app, "POST", "/campaigns", Some(json!({"model": "t1_incomplete.gem"}))).await;
    assert_eq!(s, StatusCode::BAD_REQUEST);
    let oracle_without_truth = json!({"model": "t1_incomplete.gem", "environment": "t1.env", "mode": "oracle", "deleted": ["codes(g9,e1)"]});
    let (s, _) = call(&app, "POST", "/campaigns", Some(oracle_without_truth)).await;
    assert_eq!(s, StatusCode::BAD_REQUEST);
    let (s, _) = call(&app, "POST", "/campaigns", Some(json!({"model": "t1_incomplete.gem", "environment": "t1.env", "budget": {"max_cost": "-1"}}))).await;
    assert_eq!(s, StatusCode::BAD_REQUEST);

    let (s, e) = call(&app, "POST", "/models", Some(json!({"name": "t1_incomplete.gem", "content": "metabolite A\n"}))).await;
    assert_eq!((s, e["error"].as_str()), (StatusCode::CONFLICT, Some("name_taken")));
    let (s, _) = call(&app, "POST", "/models", Some(json!({"name": "t1_incomplete.gem", "content": T1_INCOMPLETE_MODEL}))).await;
    assert_eq!(s, StatusCode::OK);
    let (s, _) = call(&app, "POST", "/models", Some(json!({"name": "../escape.gem", "content": "metabolite A\n"}))).await;
    assert_eq!(s, StatusCode::BAD_REQUEST);
    let (s, _) = call(&app, "POST", "/models", Some(json!({"name": "broken.gem", "content": "reaction r1 rev=0 enz=e9 sub=A prod=B\n"}))).await;
    assert_eq!(s, StatusCode::BAD_REQUEST);
    let (s, _) = call(&app, "POST", "/environments", Some(json!({"name": "broken.env", "content": "medium M X\n"}))).await;
    assert_eq!(s, StatusCode::BAD_REQUEST);
}

#[tokio::test]
async fn budget_stops_an_external_campaign() {
    let dir = tempfile::tempdir().unwrap();
    let app = app_in(dir.path());
    seed_t1(&app).await;
    let mut body = external_t1();
    body["budget"] = json!({"max_trials": 1});
    let (_, c) = call(&app, "POST", "/campaigns", Some(body)).await;
    let id = c["id"].as_str().unwrap();
    let (_, c) = call(&app, "POST", &format!("/campaigns/{id}/outcome"), Some(outcome("g2", "M_A", "no_growth"))).await;
    assert_eq!(c["status"], "budget_exhausted");
}

#[tokio::test]
async fn restart_replays_every_campaign() {
    let dir = tempfile::tempdir().unwrap();
    let app = app_in(dir.path());
    seed_t1(&app).await;
    let (_, a) = call(&app, "POST", "/campaigns", Some(external_t1())).await;
    let (_, b) = call(&app, "POST", "/campaigns", Some(json!({"model": "t1_incomplete.gem", "environment": "t1.env", "strategy": "random", "seed": 3}))).await;
    let a_id = a["id"].as_str().unwrap().to_string();
    let b_id = b["id"].as_str().unwrap().to_string();
    call(&app, "POST", &format!("/campaigns/{a_id}/outcome"), Some(outcome("g2", "M_A", "no_growth"))).await;

    let mut before = Vec::new();
    for uri in [format!("/campaigns/{a_id}"), format!("/campaigns/{b_id}"), format!("/campaigns/{a_id}/hypotheses"), "/campaigns".into()] {
        before.push(call(&app, "GET", &uri, None).await);
    }
    let metrics_before = call_text(&app, "GET", &format!("/campaigns/{a_id}/metrics"), None).await;
    drop(app);

    let store = Store::open(dir.path(), 2).unwrap();
    assert!(store.skipped().is_empty());
    let app = router(Arc::new(store));
    let mut after = Vec::new();
    for uri in [format!("/campaigns/{a_id}"), format!("/campaigns/{b_id}"), format!("/campaigns/{a_id}/hypotheses"), "/campaigns".into()] {
        after.push(call(&app, "GET", &uri, None).await);
    }
    assert_eq!(before, after);
    assert_eq!(metrics_before, call_text(&app, "GET", &format!("/campaigns/{a_id}/metrics"), None).await);

    let (s, c) = call(&app, "POST", &format!("/campaigns/{a_id}/outcome"), Some(outcome("g2", "M_B", "no_growth"))).await;
    assert_eq!((s, c["status"].as_str()), (StatusCode::OK, Some("done")));
    let (_, fresh) = call(&app, "POST", "/campaigns", Some(external_t1())).await;
    assert_ne!(fresh["id"], a["id"]);
    assert_ne!(fresh["id"], b["id"]);

    drop(app);
    let app = app_in(dir.path());
    let (_, c) = call(&app, "GET", &format!("/campaigns/{a_id}"), None).await;
    assert_eq!(c["status"], "done");
    assert_eq!(c["recovered"], T1_DELETED);
}

#[tokio::test]
async fn corrupt_log_is_skipped_at_startup() {
    let dir = tempfile::tempdir().unwrap();
    let app = app_in(dir.path());
    seed_t1(&app).await;
    let (_, a) = call(&app, "POST", "/campaigns", Some(external_t1())).await;
    drop(app);
    let path = dir.path().join("campaigns").join(format!("{}.jsonl", a["id"].as_str().unwrap()));
    let mut text = std::fs::read_to_string(&path).unwrap();
    text.push_str("{\"type\":\"step\"");
    std::fs::write(&path, text).unwrap();
    let store = Store::open(dir.path(), 1).unwrap();
    assert_eq!(store.skipped().len(), 1);
    assert!(store.list().is_empty());
}

#[tokio::test(flavor = "multi_thread", worker_threads = 4)]
async fn reads_during_submits_see_log_prefixes() {
    let (model, env) = generate(&SynthParams { genes: 40, reactions: 90, metabolites: 70, media: 4, seed: 2 });
    let (incomplete, (g, e)) = (0..)
        .find_map(|s| observable_deletion(&model, &env, s, 1))
        .unwrap();
    let model_text = incomplete.to_string();
    let env_text = env.to_string();
    let reference = run_campaign(
        &Source::new("s.gem", model_text.clone()),
        &Source::new("s.env", env_text.clone()),
        &CampaignConfig::oracle([fact_id(&g, &e)], Strategy::Ase),
        1,
    )
    .unwrap();
    let mut prefixes: HashSet<(u64, u64)> = HashSet::from([(0, reference.steps()[0].alive_before as u64)]);
    prefixes.extend(reference.steps().iter().map(|s| (s.step as u64, s.alive_count as u64)));

    let dir = tempfile::tempdir().unwrap();
    let app = app_in(dir.path());
    call(&app, "POST", "/models", Some(json!({"name": "s.gem", "content": model_text}))).await;
    call(&app, "POST", "/environments", Some(json!({"name": "s.env", "content": env_text}))).await;
    let (_, c) = call(&app, "POST", "/campaigns", Some(json!({"model": "s.gem", "environment": "s.env"}))).await;
    let id = c["id"].as_str().unwrap().to_string();

    let reader = {
        let app = app.clone();
        let id = id.clone();
        tokio::spawn(async move {
            let mut seen = Vec::new();
            loop {
                let (_, c) = call(&app, "GET", &format!("/campaigns/{id}"), None).await;
                seen.push((c["steps"].as_u64().unwrap(), c["alive_count"].as_u64().unwrap()));
                if c["status"] != "awaiting_outcome" {
                    return seen;
                }
                tokio::task::yield_now().await;
            }
        })
    };
    for step in reference.steps() {
        let body = json!({"trial": step.trial, "phenotype": step.outcome.label()});
        let (s, _) = call(&app, "POST", &format!("/campaigns/{id}/outcome"), Some(body)).await;
        assert_eq!(s, StatusCode::OK);
    }
    let seen = reader.await.unwrap();
    assert!(seen.iter().all(|p| prefixes.contains(p)), "{seen:?} vs {prefixes:?}");
    let (_, c) = call(&app, "GET", &format!("/campaigns/{id}"), None).await;
    assert_eq!(c["steps"].as_u64().unwrap() as usize, reference.steps().len());
    assert_eq!(c["status"], serde_json::to_value(reference.status()).unwrap());
}
