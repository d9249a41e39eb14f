#![allow(dead_code)]

use std::fs;
use std::io::{BufRead, BufReader, Read, Write};
use std::net::TcpListener;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::thread;

use serde_json::Value;

pub fn repo() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../..").canonicalize().unwrap()
}

pub struct Run {
    pub code: i32,
    pub stderr: String,
}

pub fn povsent(dir: &Path, args: &[&str]) -> Run {
    povsent_env(dir, args, &[])
}

pub fn povsent_env(dir: &Path, args: &[&str], env: &[(&str, &str)]) -> Run {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_povsent"));
    cmd.current_dir(dir).args(args).env("POVSENT_LOG", "warn");
    for (k, v) in env {
        cmd.env(k, v);
    }
    let out = cmd.output().expect("binary runs");
    Run {
        code: out.status.code().unwrap_or(-1),
        stderr: String::from_utf8_lossy(&out.stderr).into_owned(),
    }
}

/// Writes `povsent.toml` for the synthetic fixture plus `extra` TOML.
pub fn synthetic_config(dir: &Path, extra: &str) -> PathBuf {
    let root = repo();
    let fx = root.join("fixtures/synthetic");
    let text = format!(
        "output_dir = \"out\"\n\n[paths]\nlexicon = \"{}\"\nsentences = \"{}\"\nannotations = \"{}\"\ntest_set = \"{}\"\n\n{extra}\n",
        root.join("data/lexicon.csv").display(),
        fx.join("sentences.csv").display(),
        fx.join("annotations.csv").display(),
        fx.join("test_set.csv").display(),
    );
    let path = dir.join("povsent.toml");
    fs::write(&path, text).unwrap();
    path
}

pub fn json(path: &Path) -> Value {
    serde_json::from_slice(&fs::read(path).unwrap_or_else(|e| panic!("{}: {e}", path.display()))).unwrap()
}

/// Every file under `dir`, relative path to contents.
pub fn snapshot(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.push((p.strip_prefix(dir).unwrap().display().to_string(), fs::read(&p).unwrap()));
            }
        }
    }
    out.sort();
    out
}

pub struct Captured {
    pub headers: String,
    pub body: String,
}

/// One-connection-per-request HTTP server answering every request with
/// `reply(body)` as the chat message content.
pub fn chat_server(requests: usize, reply: fn(&str) -> (u16, String)) -> (String, thread::JoinHandle<Vec<Captured>>) {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let url = format!("http://{}", listener.local_addr().unwrap());
    let handle = thread::spawn(move || {
        let mut seen = Vec::new();
        for _ in 0..requests {
            let (mut stream, _) = listener.accept().unwrap();
            let mut reader = BufReader::new(stream.try_clone().unwrap());
            let mut headers = String::new();
            let mut len = 0;
            loop {
                let mut line = String::new();
                reader.read_line(&mut line).unwrap();
                if line == "\r\n" || line.is_empty() {
                    break;
                }
                if let Some(v) = line.to_ascii_lowercase().strip_prefix("content-length:") {
                    len = v.trim().parse().unwrap();
                }
                headers.push_str(&line);
            }
            let mut buf = vec![0; len];
            reader.read_exact(&mut buf).unwrap();
            let body = String::from_utf8(buf).unwrap();
            let (status, content) = reply(&body);
            let payload = if status == 200 {
                serde_json::json!({"choices": [{"message": {"role": "assistant", "content": content}}]}).to_string()
            } else {
                "{}".to_string()
            };
            write!(
                stream,
                "HTTP/1.1 {status} X\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{payload}",
                payload.len()
            )
            .unwrap();
            seen.push(Captured { headers, body });
        }
        seen
    });
    (url, handle)
}
