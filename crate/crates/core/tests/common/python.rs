use std::io::Write;
use std::process::{Command, Stdio};

/// Batch compile check through CPython. `None` when no interpreter is available.
pub fn python_compiles(sources: &[String]) -> Option<Vec<bool>> {
    let script = r#"
import json, sys
out = []
for src in json.load(sys.stdin):
    try:
        compile(src, "<generated>", "exec")
        out.append(True)
    except SyntaxError:
        out.append(False)
print(json.dumps(out))
"#;
    let mut child = Command::new("python3")
        .args(["-c", script])
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::inherit())
        .spawn()
        .ok()?;
    let payload = serde_json::to_string(sources).unwrap();
    child.stdin.take().unwrap().write_all(payload.as_bytes()).ok()?;
    let output = child.wait_with_output().ok()?;
    if !output.status.success() {
        return None;
    }
    serde_json::from_slice(&output.stdout).ok()
}
