use axum::routing::post;
use axum::{Json, Router};
use lakefuse_service::config::ProviderConfig;
use lakefuse_service::provider::{generate_query_table, ProviderRegistry, REMOTE};
use lakefuse_service::ServiceError;
use serde_json::{json, Value};

async fn mock(reply: &'static str) -> String {
    let app = Router::new().route(
        "/v1/completions",
        post(move |headers: axum::http::HeaderMap, Json(body): Json<Value>| async move {
            assert!(body["prompt"].as_str().unwrap().contains("vaccines"));
            let auth = headers.get("authorization").map(|v| v.to_str().unwrap().to_string());
            assert_eq!(auth.as_deref(), Some("Bearer sk-test"));
            Json(json!({"choices": [{"text": reply}]}))
        }),
    );
    let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
    let addr = listener.local_addr().unwrap();
    tokio::spawn(async move { axum::serve(listener, app).await.unwrap() });
    format!("http://{addr}/v1/completions")
}

fn registry(endpoint: String) -> ProviderRegistry {
    std::env::set_var("LAKEFUSE_TEST_KEY", "sk-test");
    ProviderRegistry::from_config(&ProviderConfig {
        endpoint: Some(endpoint),
        key_env: Some("LAKEFUSE_TEST_KEY".into()),
        model: None,
    })
}

#[tokio::test(flavor = "multi_thread")]
async fn remote_provider_parses_csv_completion() {
    let reg = registry(mock("vaccine,country\nModerna,USA\nPfizer,Germany\n").await);
    let t = tokio::task::spawn_blocking(move || generate_query_table(&reg, "vaccines", 2, 2, Some(REMOTE)))
        .await
        .unwrap()
        .unwrap();
    assert_eq!(t.columns(), ["vaccine", "country"]);
    assert_eq!(t.rows()[1][1].as_str(), Some("Germany"));
}

#[tokio::test(flavor = "multi_thread")]
async fn remote_shape_mismatch_is_malformed() {
    let reg = registry(mock("vaccine\nModerna\n").await);
    let err = tokio::task::spawn_blocking(move || generate_query_table(&reg, "vaccines", 2, 2, None))
        .await
        .unwrap()
        .unwrap_err();
    assert!(matches!(err, ServiceError::MalformedGenerated(_)), "{err}");
}

#[test]
fn unreachable_endpoint_is_provider_failure() {
    let reg = ProviderRegistry::from_config(&ProviderConfig {
        endpoint: Some("http://127.0.0.1:9/none".into()),
        key_env: None,
        model: None,
    });
    let err = generate_query_table(&reg, "x", 1, 1, None).unwrap_err();
    assert_eq!(err.code(), "provider_failure");
}
