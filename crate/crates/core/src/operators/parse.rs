//! Extraction of sketches, code blocks and JSON objects from model replies.

use serde_json::Value;

/// Solver libraries generated code must not import.
pub const FORBIDDEN_MODULES: &[&str] = &[
    "ortools", "gurobipy", "pulp", "pyomo", "cvxpy", "mip", "z3", "pyscipopt", "scip", "cplex", "docplex",
];

/// The interior of the first fenced block and the byte range of the whole fence.
fn first_fence(text: &str) -> Option<(&str, usize, usize)> {
    let open = text.find("```")?;
    let after_tag = open + text[open..].find('\n')? + 1;
    let rest = &text[after_tag..];
    let (interior_end, close) = if rest.starts_with("```") {
        (after_tag, after_tag)
    } else {
        let nl = rest.find("\n```")?;
        (after_tag + nl, after_tag + nl + 1)
    };
    Some((&text[after_tag..interior_end], open, close + 3))
}

/// Code inside the first fenced block, without the newline before the closing fence.
pub fn extract_code(text: &str) -> Option<&str> {
    first_fence(text).map(|(code, _, _)| code)
}

/// Prose before the first fence, trimmed.
pub fn extract_sketch(text: &str) -> &str {
    match text.find("```") {
        Some(i) => text[..i].trim(),
        None => text.trim(),
    }
}

/// Removes every fenced block, keeping the surrounding prose.
pub fn strip_fences(text: &str) -> String {
    let mut out = String::new();
    let mut rest = text;
    while let Some((_, start, end)) = first_fence(rest) {
        out.push_str(&rest[..start]);
        rest = &rest[end..];
    }
    // an unterminated fence swallows the remainder
    match rest.find("```") {
        Some(i) => out.push_str(&rest[..i]),
        None => out.push_str(rest),
    }
    out.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// First balanced `{...}` span that parses as a JSON object.
pub fn first_json_object(text: &str) -> Option<Value> {
    let bytes = text.as_bytes();
    let mut start = 0;
    while let Some(off) = text[start..].find('{') {
        let open = start + off;
        let mut depth = 0usize;
        let mut in_str = false;
        let mut escaped = false;
        let mut end = None;
        for (i, &b) in bytes.iter().enumerate().skip(open) {
            if in_str {
                match b {
                    _ if escaped => escaped = false,
                    b'\\' => escaped = true,
                    b'"' => in_str = false,
                    _ => {}
                }
                continue;
            }
            match b {
                b'"' => in_str = true,
                b'{' => depth += 1,
                b'}' => {
                    depth -= 1;
                    if depth == 0 {
                        end = Some(i);
                        break;
                    }
                }
                _ => {}
            }
        }
        if let Some(end) = end {
            if let Ok(v @ Value::Object(_)) = serde_json::from_str::<Value>(&text[open..=end]) {
                return Some(v);
            }
        }
        start = open + 1;
    }
    None
}

/// Forbidden top-level modules imported by `code`, in order of appearance.
pub fn forbidden_imports(code: &str) -> Vec<String> {
    let mut found = Vec::new();
    let mut note = |module: &str| {
        let root = module.trim().split('.').next().unwrap_or("").trim();
        if FORBIDDEN_MODULES.contains(&root) && !found.iter().any(|f| f == root) {
            found.push(root.to_string());
        }
    };
    for line in code.lines() {
        let line = line.trim_start();
        if let Some(rest) = line.strip_prefix("import ") {
            for part in rest.split('#').next().unwrap_or("").split(',') {
                note(part.split_whitespace().next().unwrap_or(""));
            }
        } else if let Some(rest) = line.strip_prefix("from ") {
            note(rest.split_whitespace().next().unwrap_or(""));
        }
    }
    found
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn code_and_sketch() {
        let reply = "Greedy by deadline.\n\n```python\ndef solve(**kw):\n    yield {}\n```\ntrailing";
        assert_eq!(extract_sketch(reply), "Greedy by deadline.");
        assert_eq!(extract_code(reply), Some("def solve(**kw):\n    yield {}"));
        assert_eq!(extract_code("no fence"), None);
        assert_eq!(extract_code("```\n```"), Some(""));
        assert_eq!(extract_code("```python\nunterminated"), None);
    }

    #[test]
    fn json_scan_skips_prose_and_braces_in_strings() {
        let v = first_json_object(r#"Sure {not json} here: {"summary": "a } brace \" q", "is_bug": true} done"#).unwrap();
        assert_eq!(v["is_bug"], true);
        assert_eq!(v["summary"], "a } brace \" q");
        assert!(first_json_object("[1, 2]").is_none());
    }

    #[test]
    fn forbidden_import_detection() {
        let code = "import math, ortools.sat as s\nfrom pulp import LpProblem\nimport mipx\n  import z3";
        assert_eq!(forbidden_imports(code), vec!["ortools", "pulp", "z3"]);
        assert!(forbidden_imports("import random\nfrom itertools import permutations").is_empty());
    }

    #[test]
    fn strip_fences_drops_code() {
        assert_eq!(strip_fences("Use greedy\n```py\nsecret()\n```\n then  swap"), "Use greedy then swap");
    }

    proptest! {
        #[test]
        fn single_block_is_extracted_byte_for_byte(
            prose in "[a-zA-Z .,]{0,40}",
            lang in "[a-z]{0,8}",
            body in "[a-zA-Z0-9 _=():\n{}\"'\\[\\]]{0,200}",
        ) {
            prop_assume!(!body.contains("```"));
            let reply = format!("{prose}\n```{lang}\n{body}\n```\n");
            prop_assert_eq!(extract_code(&reply), Some(body.as_str()));
        }
    }
}
