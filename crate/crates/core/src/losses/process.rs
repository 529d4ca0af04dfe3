//! Subprocess adapter for a real image/text encoder.
//!
//! The child speaks JSON lines on stdin/stdout. Each request is one object
//! with an `op` field:
//!
//! | op            | request fields                         | response        |
//! |---------------|----------------------------------------|-----------------|
//! | `info`        |                                        | `name`, `dim`   |
//! | `embed_text`  | `text`                                 | `embedding`     |
//! | `embed_image` | `width`, `height`, `pixels`            | `embedding`     |
//! | `image_vjp`   | `width`, `height`, `pixels`, `grad`    | `grad`          |
//!
//! `pixels` is row-major interleaved RGB in [0, 1]. Any response carrying an
//! `error` string fails the call with [`Error::BackendFailure`].

use std::collections::HashMap;
use std::io::{BufRead, BufReader, Write};
use std::process::{Child, ChildStdin, ChildStdout, Command, Stdio};
use std::sync::Mutex;

use serde::Deserialize;
use serde_json::{json, Value};

use super::backend::EmbeddingBackend;
use crate::error::{Error, Result};
use crate::raster::{ImageGrad, Raster};

struct Channel {
    child: Child,
    stdin: ChildStdin,
    stdout: BufReader<ChildStdout>,
}

pub struct ProcessBackend {
    name: String,
    dim: usize,
    channel: Mutex<Channel>,
    text_cache: Mutex<HashMap<String, Vec<f64>>>,
}

#[derive(Deserialize)]
struct Info {
    name: String,
    dim: usize,
}

fn failure(msg: impl std::fmt::Display) -> Error {
    Error::BackendFailure(msg.to_string())
}

impl ProcessBackend {
    /// Starts `command[0]` with the remaining arguments and queries `info`.
    pub fn spawn(command: &[String]) -> Result<Self> {
        let (program, args) = command
            .split_first()
            .ok_or_else(|| failure("empty encoder command"))?;
        let mut child = Command::new(program)
            .args(args)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::inherit())
            .spawn()
            .map_err(|e| failure(format!("cannot start encoder {program:?}: {e}")))?;
        let stdin = child.stdin.take().expect("piped stdin");
        let stdout = BufReader::new(child.stdout.take().expect("piped stdout"));
        let mut backend = ProcessBackend {
            name: String::new(),
            dim: 0,
            channel: Mutex::new(Channel {
                child,
                stdin,
                stdout,
            }),
            text_cache: Mutex::new(HashMap::new()),
        };
        let info: Info = serde_json::from_value(backend.call(json!({"op": "info"}))?)
            .map_err(|e| failure(format!("bad info response: {e}")))?;
        if info.dim == 0 {
            return Err(failure("encoder reports dimension 0"));
        }
        backend.name = info.name;
        backend.dim = info.dim;
        Ok(backend)
    }

    fn call(&self, request: Value) -> Result<Value> {
        let mut ch = self
            .channel
            .lock()
            .map_err(|_| failure("encoder channel poisoned"))?;
        let mut line = serde_json::to_string(&request)?;
        line.push('\n');
        ch.stdin
            .write_all(line.as_bytes())
            .and_then(|_| ch.stdin.flush())
            .map_err(|e| failure(format!("encoder write failed: {e}")))?;
        let mut reply = String::new();
        let n = ch
            .stdout
            .read_line(&mut reply)
            .map_err(|e| failure(format!("encoder read failed: {e}")))?;
        if n == 0 {
            return Err(failure("encoder closed its output"));
        }
        let value: Value =
            serde_json::from_str(&reply).map_err(|e| failure(format!("bad encoder reply: {e}")))?;
        if let Some(msg) = value.get("error") {
            return Err(failure(
                msg.as_str().map_or_else(|| msg.to_string(), String::from),
            ));
        }
        Ok(value)
    }

    fn vector(&self, value: &Value, key: &str, len: usize) -> Result<Vec<f64>> {
        let v: Vec<f64> = value
            .get(key)
            .and_then(|v| serde_json::from_value(v.clone()).ok())
            .ok_or_else(|| failure(format!("encoder reply lacks {key:?}")))?;
        if v.len() != len {
            return Err(failure(format!(
                "encoder returned {} values for {key:?}, expected {len}",
                v.len()
            )));
        }
        if v.iter().any(|x| !x.is_finite()) {
            return Err(failure(format!("encoder returned non-finite {key:?}")));
        }
        Ok(v)
    }

    fn image_request(op: &str, image: &Raster) -> Value {
        let pixels: Vec<f64> = image.pixels.iter().flatten().copied().collect();
        json!({"op": op, "width": image.width, "height": image.height, "pixels": pixels})
    }
}

impl Drop for ProcessBackend {
    fn drop(&mut self) {
        if let Ok(ch) = self.channel.get_mut() {
            let _ = ch.child.kill();
            let _ = ch.child.wait();
        }
    }
}

impl EmbeddingBackend for ProcessBackend {
    fn name(&self) -> &str {
        &self.name
    }

    fn dim(&self) -> usize {
        self.dim
    }

    fn embed_image(&self, image: &Raster) -> Result<Vec<f64>> {
        image.check()?;
        let reply = self.call(Self::image_request("embed_image", image))?;
        self.vector(&reply, "embedding", self.dim)
    }

    fn embed_text(&self, text: &str) -> Result<Vec<f64>> {
        if let Some(v) = self
            .text_cache
            .lock()
            .ok()
            .and_then(|c| c.get(text).cloned())
        {
            return Ok(v);
        }
        let reply = self.call(json!({"op": "embed_text", "text": text}))?;
        let v = self.vector(&reply, "embedding", self.dim)?;
        if let Ok(mut cache) = self.text_cache.lock() {
            cache.insert(text.to_string(), v.clone());
        }
        Ok(v)
    }

    fn image_vjp(&self, image: &Raster, grad: &[f64]) -> Result<ImageGrad> {
        if grad.len() != self.dim {
            return Err(Error::LengthMismatch(format!(
                "gradient has {} entries, expected {}",
                grad.len(),
                self.dim
            )));
        }
        let mut request = Self::image_request("image_vjp", image);
        request["grad"] = json!(grad);
        let reply = self.call(request)?;
        let flat = self.vector(&reply, "grad", 3 * image.len())?;
        Ok(flat.chunks_exact(3).map(|c| [c[0], c[1], c[2]]).collect())
    }
}
