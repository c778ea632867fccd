//! Pulling a program out of a model response, and counting its lines.

use serde::{Deserialize, Serialize};

/// Runtime-specific knobs for extraction and line counting.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CodeRules {
    /// A fence-less response counts as code when some line starts with one of these.
    pub keywords: Vec<String>,
    pub comment_prefixes: Vec<String>,
}

impl CodeRules {
    pub fn python() -> CodeRules {
        let kw = ["import", "from", "def", "class", "for", "while", "if", "with", "try", "print", "return"];
        CodeRules {
            keywords: kw.iter().map(|s| s.to_string()).collect(),
            comment_prefixes: vec!["#".to_string()],
        }
    }
}

impl Default for CodeRules {
    fn default() -> Self {
        CodeRules::python()
    }
}

struct Block<'a> {
    lines: Vec<&'a str>,
}

/// Backtick run that opens a fence, or `None`.
fn opening(line: &str) -> Option<usize> {
    let indent = line.len() - line.trim_start_matches(' ').len();
    if indent > 3 {
        return None;
    }
    let rest = &line[indent..];
    let ticks = rest.len() - rest.trim_start_matches('`').len();
    // An info string may not contain backticks.
    (ticks >= 3 && !rest[ticks..].contains('`')).then_some(ticks)
}

fn closes(line: &str, ticks: usize) -> bool {
    let t = line.trim();
    t.len() >= ticks && t.bytes().all(|b| b == b'`')
}

fn blocks<'a>(lines: &[&'a str]) -> Vec<Block<'a>> {
    let mut out = Vec::new();
    let mut i = 0;
    while i < lines.len() {
        if let Some(ticks) = opening(lines[i]) {
            let start = i + 1;
            let mut end = start;
            while end < lines.len() && !closes(lines[end], ticks) {
                end += 1;
            }
            out.push(Block { lines: lines[start..end].to_vec() });
            i = end + 1;
        } else {
            i += 1;
        }
    }
    out
}

fn starts_with_keyword(line: &str, keywords: &[String]) -> bool {
    let t = line.trim_start();
    keywords.iter().any(|k| {
        t.strip_prefix(k.as_str())
            .is_some_and(|rest| !rest.starts_with(|c: char| c.is_alphanumeric() || c == '_'))
    })
}

/// Extracts with the Python rules.
pub fn extract_code(raw: &str) -> Option<String> {
    extract_code_with(raw, &CodeRules::python())
}

/// Contents of the longest fenced block (first wins on ties; an unclosed fence
/// runs to the end). Without fences, the whole response if it looks like code.
pub fn extract_code_with(raw: &str, rules: &CodeRules) -> Option<String> {
    let lines: Vec<&str> = raw.split('\n').map(|l| l.trim_end_matches('\r')).collect();
    let found = blocks(&lines);
    if !found.is_empty() {
        let mut best: Option<&Block> = None;
        for b in found.iter().filter(|b| b.lines.iter().any(|l| !l.trim().is_empty())) {
            if best.is_none_or(|x| b.lines.len() > x.lines.len()) {
                best = Some(b);
            }
        }
        return best.map(|b| b.lines.join("\n"));
    }
    if lines.iter().any(|l| starts_with_keyword(l, &rules.keywords)) {
        let text = lines.join("\n");
        return Some(text.trim_matches('\n').to_string());
    }
    None
}

/// Wraps code in a fence long enough that no inner line can close it.
pub fn wrap_in_fence(code: &str) -> String {
    let longest = code
        .split('\n')
        .map(|l| l.trim())
        .filter(|t| !t.is_empty() && t.bytes().all(|b| b == b'`'))
        .map(str::len)
        .max()
        .unwrap_or(0);
    let fence = "`".repeat(longest.max(2) + 1);
    format!("{fence}\n{code}\n{fence}")
}

/// Python line count.
pub fn loc_metric(script: &str) -> u64 {
    loc_metric_with(script, &CodeRules::python())
}

/// Non-blank lines that are not pure comment lines.
pub fn loc_metric_with(script: &str, rules: &CodeRules) -> u64 {
    script
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty())
        .filter(|l| !rules.comment_prefixes.iter().any(|p| l.starts_with(p.as_str())))
        .count() as u64
}
