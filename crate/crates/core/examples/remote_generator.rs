//! Talks to a generation service over HTTP. Starts a throwaway local server
//! that fails once with 503 and then answers, so the retry path is visible.
//! Set `QAFORGE_GENERATOR_URL` to point at a real service instead.
//!
//! ```text
//! cargo run --example remote_generator
//! ```

use std::io::{BufRead, BufReader, Read, Write};
use std::net::TcpListener;
use std::thread;

use qaforge::generator::{GenerationRequest, Generator, RemoteGenerator};

fn mock_service() -> std::io::Result<String> {
    let listener = TcpListener::bind("127.0.0.1:0")?;
    let url = format!("http://{}", listener.local_addr()?);
    thread::spawn(move || {
        for (i, stream) in listener.incoming().enumerate() {
            let Ok(mut stream) = stream else { break };
            let mut reader = BufReader::new(&mut stream);
            let mut length = 0;
            loop {
                let mut line = String::new();
                if reader.read_line(&mut line).unwrap_or(0) == 0 || line == "\r\n" {
                    break;
                }
                if let Some(v) = line.to_ascii_lowercase().strip_prefix("content-length:") {
                    length = v.trim().parse().unwrap_or(0);
                }
            }
            let mut body = vec![0; length];
            let _ = reader.read_exact(&mut body);
            let request: serde_json::Value = serde_json::from_slice(&body).unwrap_or_default();
            let (status, reply) = if i == 0 {
                (503, "{}".to_owned())
            } else {
                let n = request["num_samples"].as_u64().unwrap_or(1);
                let items: Vec<String> = (0..n)
                    .map(|k| {
                        format!(r#"{{"text":"question q{k} answer Bristol","lm_score":-{k}.25}}"#)
                    })
                    .collect();
                (200, format!(r#"{{"candidates":[{}]}}"#, items.join(",")))
            };
            let _ = write!(
                stream,
                "HTTP/1.1 {status} X\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{reply}",
                reply.len()
            );
        }
    });
    Ok(url)
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let remote = match RemoteGenerator::from_env() {
        Some(r) => r,
        None => RemoteGenerator::new(&mock_service()?),
    };
    println!("endpoint {}", remote.endpoint());
    let request = GenerationRequest {
        num_samples: 3,
        ..GenerationRequest::new("The Avon River reaches the sea at Bristol.", "en")
    };
    for c in remote.generate(&request, 0)? {
        println!("{:>6.2}  {}", c.lm_score, c.text);
    }
    Ok(())
}
