//! Drives a steering session over HTTP: starts the server on a free port,
//! walks out and turns back, and prints what each step retrieved.
//!
//! cargo run -p context-memory-gateway --example steering_session

use serde_json::{json, Value};
use tokio::io::{AsyncReadExt, AsyncWriteExt};
use tokio::net::TcpStream;

async fn post(addr: std::net::SocketAddr, path: &str, body: &Value) -> std::io::Result<Value> {
    let body = body.to_string();
    let mut s = TcpStream::connect(addr).await?;
    s.write_all(
        format!(
            "POST {path} HTTP/1.1\r\nHost: localhost\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{body}",
            body.len()
        )
        .as_bytes(),
    )
    .await?;
    let mut resp = String::new();
    s.read_to_string(&mut resp).await?;
    let (_, body) = resp.split_once("\r\n\r\n").unwrap_or_default();
    Ok(serde_json::from_str(body)?)
}

#[tokio::main]
async fn main() -> Result<(), Box<dyn std::error::Error>> {
    let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await?;
    let addr = listener.local_addr()?;
    let app = ctxmem_gateway::api::router(Default::default());
    tokio::spawn(async move { axum::serve(listener, app).await });

    let created = post(addr, "/sessions", &json!({"retrieval": {"k": 6}})).await?;
    let id = created["session_id"]
        .as_str()
        .ok_or("no session id")?
        .to_owned();
    println!("session {id}, {} landmarks", created["world"]["landmarks"]);

    // Four steps forward, a half turn, four steps back.
    let moves = std::iter::repeat_n(json!({"forward": 2.0}), 4)
        .chain([json!({"yaw": std::f64::consts::PI})])
        .chain(std::iter::repeat_n(json!({"forward": 2.0}), 4));
    for delta in moves {
        let r = post(
            addr,
            &format!("/sessions/{id}/step"),
            &json!({"delta": delta}),
        )
        .await?;
        if let Some(err) = r.get("error") {
            return Err(format!("{err}: {}", r["message"]).into());
        }
        let picks: Vec<String> = r["retrieved"]
            .as_array()
            .into_iter()
            .flatten()
            .map(|f| format!("{}:{}", f["id"], f["stage"].as_str().unwrap_or("?")))
            .collect();
        println!(
            "step {:>2} at ({:>5.1}, {:>4.1})  coverage {:.2}  {}",
            r["step"],
            r["pose"]["x"].as_f64().unwrap_or(f64::NAN),
            r["pose"]["y"].as_f64().unwrap_or(f64::NAN),
            r["coverage"].as_f64().unwrap_or(f64::NAN),
            picks.join(" ")
        );
    }
    Ok(())
}
