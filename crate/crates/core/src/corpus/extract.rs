//! Textual function-definition finder for a single C/C++ file.

use super::lexer::{lex, Token, TokenKind};

/// A definition located in one file, before token filtering.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FoundFunction {
    pub name: String,
    /// Byte offsets, end exclusive. Includes attached leading comments.
    pub start: usize,
    pub end: usize,
    pub start_line: u32,
    pub end_line: u32,
}

/// Tokens that may trail a parameter list, or precede a function name, as
/// attributes taking a parenthesized argument.
const ATTRIBUTE_WORDS: &[&str] = &[
    "__attribute__",
    "__attribute",
    "__declspec",
    "alignas",
    "_Alignas",
    "__asm__",
    "__asm",
    "asm",
    "noexcept",
    "throw",
    "decltype",
];

/// Words that can never name a function.
const NON_NAMES: &[&str] = &[
    "if",
    "else",
    "while",
    "for",
    "do",
    "switch",
    "case",
    "return",
    "sizeof",
    "typedef",
    "struct",
    "union",
    "enum",
    "int",
    "char",
    "void",
    "long",
    "short",
    "unsigned",
    "signed",
    "float",
    "double",
    "static",
    "extern",
    "inline",
    "const",
    "volatile",
    "register",
    "auto",
    "goto",
    "break",
    "continue",
    "default",
    "_Bool",
    "bool",
    "_Static_assert",
    "static_assert",
];

/// Mark tokens inside `#else`/`#elif` branches. Only the first branch of a
/// conditional takes part in brace matching.
fn shadowed_mask(src: &[u8], tokens: &[Token]) -> Vec<bool> {
    let mut mask = vec![false; tokens.len()];
    // One entry per open conditional: are we past its first branch?
    let mut stack: Vec<bool> = Vec::new();
    let mut i = 0;
    while i < tokens.len() {
        let t = &tokens[i];
        if t.directive && t.kind != TokenKind::Comment && (t.is(src, "#") || t.is(src, "%:")) {
            // Directive keyword is the next non-comment token on the line.
            let word = tokens[i + 1..]
                .iter()
                .find(|n| n.kind != TokenKind::Comment)
                .filter(|n| n.directive)
                .map(|n| n.text(src));
            match word {
                Some(b"if") | Some(b"ifdef") | Some(b"ifndef") => stack.push(false),
                Some(b"elif") | Some(b"else") | Some(b"elifdef") | Some(b"elifndef") => {
                    if let Some(top) = stack.last_mut() {
                        *top = true;
                    }
                }
                Some(b"endif") => {
                    stack.pop();
                }
                _ => {}
            }
        }
        if stack.iter().any(|&in_else| in_else) {
            mask[i] = true;
        }
        i += 1;
    }
    mask
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Scope {
    /// `extern "C" {` or `namespace x {`: definitions inside still count as top level.
    Transparent,
    Opaque,
}

/// Find every function definition in `src`.
pub fn find_functions(src: &[u8]) -> Vec<FoundFunction> {
    let all = lex(src);
    let shadow = shadowed_mask(src, &all);
    // Structural tokens: code outside directives and outside #else branches.
    // Indices point back into `all`.
    let code: Vec<usize> =
        (0..all.len()).filter(|&i| all[i].kind != TokenKind::Comment && !all[i].directive && !shadow[i]).collect();

    let mut found = Vec::new();
    let mut scopes: Vec<Scope> = Vec::new();
    let mut opaque_depth = 0usize;
    let mut paren_depth = 0usize;
    let mut boundary = 0usize; // index into `code`
    let mut ci = 0usize;

    while ci < code.len() {
        let tok = &all[code[ci]];
        let text = tok.text(src);
        match text {
            b"(" | b"[" => paren_depth += 1,
            b")" | b"]" => paren_depth = paren_depth.saturating_sub(1),
            b";" if opaque_depth == 0 && paren_depth == 0 => boundary = ci + 1,
            b"{" | b"<%" => {
                if opaque_depth == 0 && paren_depth == 0 {
                    let head = &code[boundary..ci];
                    match classify_head(src, &all, head) {
                        Head::Transparent => {
                            scopes.push(Scope::Transparent);
                            boundary = ci + 1;
                        }
                        Head::Function { name, first } => match matching_close(src, &all, &code, ci) {
                            Some(close_ci) => {
                                let close = &all[code[close_ci]];
                                let start_tok = attach_comments(src, &all, first);
                                found.push(FoundFunction {
                                    name,
                                    start: all[start_tok].span.start,
                                    end: close.span.end,
                                    start_line: all[start_tok].line,
                                    end_line: close.line,
                                });
                                ci = close_ci + 1;
                                boundary = ci;
                                continue;
                            }
                            None => {
                                log::warn!(
                                    "unbalanced braces in body of `{name}` (line {}); skipping rest of file",
                                    tok.line
                                );
                                return found;
                            }
                        },
                        Head::Other => {
                            scopes.push(Scope::Opaque);
                            opaque_depth += 1;
                        }
                    }
                } else {
                    scopes.push(Scope::Opaque);
                    opaque_depth += 1;
                }
            }
            b"}" | b"%>" => match scopes.pop() {
                Some(Scope::Opaque) => {
                    opaque_depth -= 1;
                    if opaque_depth == 0 && paren_depth == 0 {
                        boundary = ci + 1;
                    }
                }
                Some(Scope::Transparent) => boundary = ci + 1,
                None => {}
            },
            _ => {}
        }
        ci += 1;
    }
    found
}

enum Head {
    Transparent,
    Function { name: String, first: usize },
    Other,
}

fn classify_head(src: &[u8], all: &[Token], head: &[usize]) -> Head {
    let t = |k: usize| &all[head[k]];
    let is = |k: usize, s: &str| t(k).is(src, s);
    if head.is_empty() {
        return Head::Other;
    }
    if (head.len() == 2 && is(0, "extern") && t(1).kind == TokenKind::Str)
        || is(0, "namespace")
        || (head.len() >= 2 && is(0, "inline") && is(1, "namespace"))
    {
        return Head::Transparent;
    }

    // Paren groups at depth 0 within the head, as (open, close) positions.
    let mut groups = Vec::new();
    let mut depth = 0usize;
    let mut open = 0usize;
    let mut head_end = head.len();
    for k in 0..head.len() {
        let tok = t(k);
        if depth == 0 {
            if tok.is(src, "=") || tok.is(src, ",") {
                return Head::Other;
            }
            // C++ constructor initializer list: stop at the first lone ':'
            // after a parameter list.
            if tok.is(src, ":") && !groups.is_empty() {
                head_end = k;
                break;
            }
        }
        if tok.is(src, "(") {
            if depth == 0 {
                open = k;
            }
            depth += 1;
        } else if tok.is(src, ")") {
            depth = depth.saturating_sub(1);
            if depth == 0 {
                groups.push((open, k));
            }
        }
    }

    for &(open, close) in &groups {
        if close >= head_end || open == 0 {
            continue;
        }
        let Some((name, name_first)) = name_before(src, all, head, open) else {
            continue;
        };
        if !tail_is_qualifiers(src, all, &head[close + 1..head_end]) {
            continue;
        }
        let first = walk_back_specifiers(src, all, head, name_first);
        if first == name_first && !is_constructor_like(&name) {
            // No return type: `PHP_FUNCTION(x) {` and friends are macros.
            continue;
        }
        if t(first).is(src, "typedef") {
            return Head::Other;
        }
        return Head::Function { name, first: head[first] };
    }
    Head::Other
}

fn is_constructor_like(name: &str) -> bool {
    let parts: Vec<&str> = name.split("::").collect();
    match parts.as_slice() {
        [.., class, method] => method.strip_prefix('~').unwrap_or(method) == *class,
        _ => false,
    }
}

/// Name ending right before head position `open`; returns the name and the
/// head position of its first token.
fn name_before(src: &[u8], all: &[Token], head: &[usize], open: usize) -> Option<(String, usize)> {
    let tok = &all[head[open - 1]];
    let text = std::str::from_utf8(tok.text(src)).ok()?;
    if tok.kind == TokenKind::Ident {
        if NON_NAMES.contains(&text) || ATTRIBUTE_WORDS.contains(&text) || text == "operator" {
            return None;
        }
        let mut first = open - 1;
        let mut name = text.to_string();
        if first >= 1 && all[head[first - 1]].is(src, "~") {
            first -= 1;
            name.insert(0, '~');
        }
        // Qualified C++ names: A::B::f
        while first >= 2 && all[head[first - 1]].is(src, "::") && all[head[first - 2]].kind == TokenKind::Ident {
            let q = std::str::from_utf8(all[head[first - 2]].text(src)).ok()?;
            name = format!("{q}::{name}");
            first -= 2;
        }
        return Some((name, first));
    }
    // operator overloads: `operator==(`
    if tok.kind == TokenKind::Punct {
        let mut k = open - 1;
        let mut ops = String::new();
        while k > 0 && all[head[k]].kind == TokenKind::Punct && open - k <= 3 {
            ops.insert_str(0, std::str::from_utf8(all[head[k]].text(src)).ok()?);
            k -= 1;
        }
        if all[head[k]].is(src, "operator") {
            return Some((format!("operator{ops}"), k));
        }
    }
    None
}

/// After the parameter list only qualifiers and attributes may appear.
fn tail_is_qualifiers(src: &[u8], all: &[Token], tail: &[usize]) -> bool {
    let mut depth = 0usize;
    let mut k = 0;
    while k < tail.len() {
        let tok = &all[tail[k]];
        if depth > 0 {
            if tok.is(src, "(") || tok.is(src, "[") {
                depth += 1;
            } else if tok.is(src, ")") || tok.is(src, "]") {
                depth -= 1;
            }
        } else if tok.is(src, "(") {
            // Must follow an attribute-ish identifier.
            if k == 0 || all[tail[k - 1]].kind != TokenKind::Ident {
                return false;
            }
            depth = 1;
        } else if tok.is(src, "[") {
            depth = 1;
        } else if tok.kind == TokenKind::Ident
            || tok.is(src, "&")
            || tok.is(src, "&&")
            || tok.is(src, "->")
            || tok.is(src, "*")
            || tok.is(src, "::")
            || tok.is(src, "<")
            || tok.is(src, ">")
        {
        } else {
            return false;
        }
        k += 1;
    }
    depth == 0
}

/// Walk back from head position `from` over declaration specifiers and
/// attributes. Returns the head position of the earliest one.
fn walk_back_specifiers(src: &[u8], all: &[Token], head: &[usize], from: usize) -> usize {
    let mut first = from;
    let mut k = from;
    while k > 0 {
        let prev = &all[head[k - 1]];
        if prev.kind == TokenKind::Ident
            || prev.is(src, "*")
            || prev.is(src, "&")
            || prev.is(src, "&&")
            || prev.is(src, "::")
        {
            k -= 1;
            first = k;
            continue;
        }
        if prev.is(src, ">") {
            // template argument list
            let mut depth = 0usize;
            let mut j = k;
            let mut ok = false;
            while j > 0 {
                j -= 1;
                let tk = &all[head[j]];
                if tk.is(src, ">") {
                    depth += 1;
                } else if tk.is(src, "<") {
                    depth -= 1;
                    if depth == 0 {
                        ok = true;
                        break;
                    }
                } else if tk.is(src, ";") || tk.is(src, "{") || tk.is(src, "}") {
                    break;
                }
            }
            if ok && j > 0 && all[head[j - 1]].kind == TokenKind::Ident {
                k = j;
                first = k;
                continue;
            }
            break;
        }
        if prev.is(src, ")") || prev.is(src, "]") {
            // attribute group: __attribute__((...)) or [[...]]
            let (open_s, close_s) = if prev.is(src, ")") { ("(", ")") } else { ("[", "]") };
            let mut depth = 0usize;
            let mut j = k;
            while j > 0 {
                j -= 1;
                let tk = &all[head[j]];
                if tk.is(src, close_s) {
                    depth += 1;
                } else if tk.is(src, open_s) {
                    depth -= 1;
                    if depth == 0 {
                        break;
                    }
                }
            }
            if depth != 0 {
                break;
            }
            if open_s == "[" {
                if j > 0 && all[head[j - 1]].is(src, "[") {
                    k = j - 1;
                    first = k;
                    continue;
                }
                break;
            }
            if j > 0 {
                let word = all[head[j - 1]].text(src);
                if ATTRIBUTE_WORDS.iter().any(|w| w.as_bytes() == word) {
                    k = j - 1;
                    first = k;
                    continue;
                }
            }
            break;
        }
        break;
    }
    first
}

/// Index in `code` of the brace closing the one at `open_ci`.
fn matching_close(src: &[u8], all: &[Token], code: &[usize], open_ci: usize) -> Option<usize> {
    let mut depth = 0usize;
    for (ci, &i) in code.iter().enumerate().skip(open_ci) {
        let tok = &all[i];
        if tok.is(src, "{") || tok.is(src, "<%") {
            depth += 1;
        } else if tok.is(src, "}") || tok.is(src, "%>") {
            depth -= 1;
            if depth == 0 {
                return Some(ci);
            }
        }
    }
    None
}

/// Extend the definition start backwards over attached leading comments: a
/// comment that opens its own line and is separated from what follows by at
/// most one blank line.
fn attach_comments(src: &[u8], all: &[Token], first: usize) -> usize {
    let mut start = first;
    while start > 0 {
        let prev = &all[start - 1];
        if prev.kind != TokenKind::Comment || prev.directive {
            break;
        }
        let gap = &src[prev.span.end..all[start].span.start];
        if !gap.iter().all(u8::is_ascii_whitespace) {
            break;
        }
        if gap.iter().filter(|&&b| b == b'\n').count() > 2 {
            break;
        }
        let line_begin = src[..prev.span.start].iter().rposition(|&b| b == b'\n').map_or(0, |p| p + 1);
        if !src[line_begin..prev.span.start].iter().all(u8::is_ascii_whitespace) {
            break;
        }
        start -= 1;
    }
    start
}
