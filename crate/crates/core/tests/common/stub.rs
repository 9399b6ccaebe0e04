//! Minimal completions endpoint for exercising the HTTP scorer.

#![allow(dead_code)]

use std::io::{BufRead, BufReader, Read, Write};
use std::net::{TcpListener, TcpStream};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};

use serde_json::{json, Value};

/// `(char offset, token text)` pairs covering the prompt.
pub type Tokenizer = fn(&str) -> Vec<(usize, String)>;

/// Tokens are a word plus its leading whitespace.
pub fn word_tokens(prompt: &str) -> Vec<(usize, String)> {
    let mut out: Vec<(usize, String)> = Vec::new();
    let mut current = String::new();
    let mut start = 0;
    let mut seen_word = false;
    for (i, c) in prompt.chars().enumerate() {
        if c.is_whitespace() && seen_word {
            out.push((start, std::mem::take(&mut current)));
            start = i;
            seen_word = false;
        }
        if !c.is_whitespace() {
            seen_word = true;
        }
        current.push(c);
    }
    if !current.is_empty() {
        out.push((start, current));
    }
    out
}

/// Fixed four-character chunks; tokens straddle most word boundaries.
pub fn chunk_tokens(prompt: &str) -> Vec<(usize, String)> {
    let chars: Vec<char> = prompt.chars().collect();
    chars
        .chunks(4)
        .enumerate()
        .map(|(k, c)| (k * 4, c.iter().collect()))
        .collect()
}

/// Log-probability the stub assigns to a token at a position.
pub fn token_logprob(offset: usize, token: &str) -> f64 {
    -0.125 * token.chars().count() as f64 - 0.0625 * (offset % 5) as f64
}

/// Expected target sum under the stub's rules: every token ending after the
/// context boundary counts.
pub fn expected_sum(tok: Tokenizer, context: &str, target: &str) -> f64 {
    let boundary = context.chars().count();
    tok(&format!("{context}{target}"))
        .into_iter()
        .filter(|(off, t)| off + t.chars().count() > boundary)
        .map(|(off, t)| token_logprob(off, &t))
        .sum()
}

pub struct Stub {
    pub url: String,
    hits: Arc<AtomicUsize>,
    auth: Arc<Mutex<Vec<Option<String>>>>,
}

impl Stub {
    pub fn spawn(tok: Tokenizer) -> Self {
        let listener = TcpListener::bind("127.0.0.1:0").unwrap();
        let url = format!("http://{}", listener.local_addr().unwrap());
        let hits = Arc::new(AtomicUsize::new(0));
        let auth = Arc::new(Mutex::new(Vec::new()));
        let (h, a) = (hits.clone(), auth.clone());
        std::thread::spawn(move || {
            for stream in listener.incoming().flatten() {
                let (h, a) = (h.clone(), a.clone());
                std::thread::spawn(move || serve(stream, tok, &h, &a));
            }
        });
        Self { url, hits, auth }
    }

    pub fn hits(&self) -> usize {
        self.hits.load(Ordering::SeqCst)
    }

    pub fn auth_headers(&self) -> Vec<Option<String>> {
        self.auth.lock().unwrap().clone()
    }
}

fn serve(stream: TcpStream, tok: Tokenizer, hits: &AtomicUsize, auth: &Mutex<Vec<Option<String>>>) {
    let mut reader = BufReader::new(stream.try_clone().unwrap());
    let mut length = 0;
    let mut bearer = None;
    loop {
        let mut line = String::new();
        if reader.read_line(&mut line).unwrap_or(0) == 0 {
            return;
        }
        let line = line.trim_end();
        if line.is_empty() {
            break;
        }
        if let Some((name, value)) = line.split_once(':') {
            match name.to_ascii_lowercase().as_str() {
                "content-length" => length = value.trim().parse().unwrap_or(0),
                "authorization" => bearer = Some(value.trim().to_string()),
                _ => {}
            }
        }
    }
    let mut body = vec![0; length];
    if reader.read_exact(&mut body).is_err() {
        return;
    }
    hits.fetch_add(1, Ordering::SeqCst);
    auth.lock().unwrap().push(bearer);
    let req: Value = serde_json::from_slice(&body).unwrap_or(Value::Null);
    let prompt = req["prompt"].as_str().unwrap_or_default();
    let tokens = tok(prompt);
    let logprobs: Vec<Value> = tokens
        .iter()
        .enumerate()
        .map(|(k, (off, t))| if k == 0 { Value::Null } else { json!(token_logprob(*off, t)) })
        .collect();
    let payload = json!({
        "choices": [{
            "text": prompt,
            "logprobs": {
                "tokens": tokens.iter().map(|(_, t)| t).collect::<Vec<_>>(),
                "token_logprobs": logprobs,
                "text_offset": tokens.iter().map(|(o, _)| o).collect::<Vec<_>>(),
            }
        }]
    })
    .to_string();
    let mut stream = stream;
    let _ = write!(
        stream,
        "HTTP/1.1 200 OK\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{payload}",
        payload.len()
    );
}
