#![allow(dead_code)]

use std::io::{BufRead, BufReader, Read, Write};
use std::net::TcpListener;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};
use std::thread;

use qaforge::corpus::{parse_passage_stream, Passage};
use qaforge::generator::{train_reference, ReferenceBackend, ReferenceConfig, TrainingExample};
use qaforge::pipeline::{
    read_squad_file, training_examples_from_squad, BackendConfig, PipelineConfig,
};

/// Smoothing used for the toy corpus; see the end_to_end example.
pub const TOY_SMOOTHING: f64 = 0.01;

pub fn fixture(rel: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("fixtures")
        .join(rel)
}

pub fn toy_passages() -> Vec<Passage> {
    let file = std::fs::File::open(fixture("toy/passages.jsonl")).unwrap();
    parse_passage_stream(BufReader::new(file))
        .collect::<Result<_, _>>()
        .unwrap()
}

pub fn toy_training() -> Vec<TrainingExample> {
    training_examples_from_squad(&read_squad_file(&fixture("toy/train.json")).unwrap())
}

pub fn toy_backend(order: usize, smoothing: f64) -> ReferenceBackend {
    train_reference(&toy_training(), ReferenceConfig { order, smoothing }).unwrap()
}

pub fn toy_config(output_dir: &Path) -> PipelineConfig {
    let mut config = PipelineConfig::new(
        fixture("toy/passages.jsonl"),
        output_dir,
        "en",
        BackendConfig::Reference {
            training_data: fixture("toy/train.json"),
            order: 3,
            smoothing: TOY_SMOOTHING,
        },
    );
    config.seed = 42;
    config
}

/// A one-route HTTP server replying with scripted `(status, body)` pairs in
/// order; the last reply repeats once the script runs out.
pub struct MockServer {
    pub url: String,
    pub requests: Arc<Mutex<Vec<String>>>,
}

impl MockServer {
    pub fn start(script: Vec<(u16, String)>) -> Self {
        let listener = TcpListener::bind("127.0.0.1:0").unwrap();
        let url = format!("http://{}", listener.local_addr().unwrap());
        let requests = Arc::new(Mutex::new(Vec::new()));
        let log = Arc::clone(&requests);
        thread::spawn(move || {
            let mut replies = script.into_iter().peekable();
            let mut last = None;
            for stream in listener.incoming() {
                let Ok(mut stream) = stream else { break };
                let body = read_request(&mut stream);
                log.lock().unwrap().push(body);
                let (status, reply) = match replies.next() {
                    Some(r) => {
                        last = Some(r.clone());
                        r
                    }
                    None => last.clone().expect("non-empty script"),
                };
                let head = format!(
                    "HTTP/1.1 {status} X\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n",
                    reply.len()
                );
                let _ = stream.write_all(head.as_bytes());
                let _ = stream.write_all(reply.as_bytes());
            }
        });
        Self { url, requests }
    }

    pub fn request_count(&self) -> usize {
        self.requests.lock().unwrap().len()
    }
}

fn read_request(stream: &mut std::net::TcpStream) -> String {
    let mut reader = BufReader::new(stream);
    let mut length = 0;
    loop {
        let mut line = String::new();
        if reader.read_line(&mut line).unwrap_or(0) == 0 || line == "\r\n" {
            break;
        }
        let lower = line.to_ascii_lowercase();
        if let Some(v) = lower.strip_prefix("content-length:") {
            length = v.trim().parse().unwrap_or(0);
        }
    }
    let mut body = vec![0; length];
    let _ = reader.read_exact(&mut body);
    String::from_utf8_lossy(&body).into_owned()
}

/// A closed local port: connections are refused immediately.
pub fn refused_url() -> String {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let addr = listener.local_addr().unwrap();
    drop(listener);
    format!("http://{addr}")
}
