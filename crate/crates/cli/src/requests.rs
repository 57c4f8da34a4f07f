//! Request-log serialization: one JSON object per line, plus the request
//! schema header file.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use anyhow::{Context, Result};
use hmum_core::ddm::{RequestContext, RequestSchema};

pub fn write_requests_jsonl(path: &Path, requests: &[RequestContext]) -> Result<()> {
    let file = File::create(path).with_context(|| format!("creating {}", path.display()))?;
    let mut w = BufWriter::new(file);
    for req in requests {
        serde_json::to_writer(&mut w, req)?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_requests_jsonl(path: &Path) -> Result<Vec<RequestContext>> {
    let file = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    let reader = BufReader::new(file);
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.is_empty() {
            continue;
        }
        let req: RequestContext = serde_json::from_str(&line)
            .with_context(|| format!("{}:{}: bad request record", path.display(), i + 1))?;
        out.push(req);
    }
    Ok(out)
}

pub fn write_request_schema(path: &Path, schema: &RequestSchema) -> Result<()> {
    std::fs::write(path, serde_json::to_string_pretty(schema)?)
        .with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

pub fn read_request_schema(path: &Path) -> Result<RequestSchema> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(serde_json::from_str(&text)?)
}
