//! Line-oriented parser for ASan, LSan and UBSan reports.

use std::sync::OnceLock;

use regex::Regex;

use super::{RunRef, SanitizerAlert, SanitizerTool};

#[derive(Debug, Clone)]
pub struct ParseOptions {
    /// Frames kept per alert.
    pub frame_depth: usize,
}

impl Default for ParseOptions {
    fn default() -> Self {
        ParseOptions { frame_depth: 3 }
    }
}

fn re(cell: &'static OnceLock<Regex>, pattern: &str) -> &'static Regex {
    cell.get_or_init(|| Regex::new(pattern).expect("sanitizer regex"))
}

fn header_re() -> &'static Regex {
    static R: OnceLock<Regex> = OnceLock::new();
    re(&R, r"^==\d+==\s*(?:ERROR|WARNING): (\w+Sanitizer): (.*)$")
}

fn ubsan_re() -> &'static Regex {
    static R: OnceLock<Regex> = OnceLock::new();
    re(&R, r"^(.*?:\d+(?::\d+)?): runtime error: (.*)$")
}

fn summary_re() -> &'static Regex {
    static R: OnceLock<Regex> = OnceLock::new();
    re(&R, r"^SUMMARY: (\w+Sanitizer): (\S+)")
}

fn frame_re() -> &'static Regex {
    static R: OnceLock<Regex> = OnceLock::new();
    re(&R, r"^\s*#(\d+)\s+0x[0-9a-fA-F]+(?:\s+in\s+(.*?))?(?:\s+(\(.*\)|\S+))?\s*$")
}

fn leak_re() -> &'static Regex {
    static R: OnceLock<Regex> = OnceLock::new();
    re(&R, r"^(Direct|Indirect) leak of \d+ byte")
}

#[derive(Debug, Clone, PartialEq, Eq)]
struct Frame {
    function: String,
    location: Option<String>,
}

fn is_runtime_frame(f: &Frame) -> bool {
    const PREFIXES: &[&str] = &[
        "__interceptor_",
        "___interceptor_",
        "__asan_",
        "__asan::",
        "__lsan_",
        "__lsan::",
        "__ubsan_",
        "__ubsan::",
        "__sanitizer_",
        "__sanitizer::",
        "__interception::",
    ];
    // Interceptors linked statically (clang) carry the plain libc name.
    const INTERCEPTED: &[&str] = &[
        "malloc",
        "calloc",
        "realloc",
        "free",
        "reallocarray",
        "memalign",
        "posix_memalign",
        "aligned_alloc",
        "valloc",
        "pvalloc",
        "strdup",
        "strndup",
        "memcpy",
        "memmove",
        "memset",
        "memcmp",
        "strcpy",
        "strncpy",
        "strcat",
        "strncat",
        "strlen",
        "strnlen",
        "strcmp",
        "strncmp",
        "operator new",
        "operator new[]",
        "operator delete",
        "operator delete[]",
    ];
    if PREFIXES.iter().any(|p| f.function.starts_with(p)) || INTERCEPTED.contains(&f.function.as_str()) {
        return true;
    }
    f.location.as_deref().is_some_and(|l| {
        l.contains("libsanitizer")
            || l.contains("compiler-rt")
            || l.contains("sanitizer_common")
            || l.contains("/asan/")
            || l.contains("/lsan/")
            || l.contains("/ubsan/")
            || l.contains("libasan.so")
            || l.contains("libclang_rt.")
    })
}

fn parse_frame(line: &str) -> Option<Frame> {
    let caps = frame_re().captures(line)?;
    let function = caps.get(2).map(|m| m.as_str().trim().to_string());
    let location = caps.get(3).map(|m| m.as_str().to_string());
    Some(match function {
        Some(function) if !function.is_empty() => Frame { function, location },
        // `#3 0x... (/lib/libc.so.6+0x29d8f) (BuildId: ..)`: no symbol
        _ => {
            let module = location.as_deref().and_then(module_offset);
            Frame { function: module.clone().unwrap_or_else(|| "<unknown>".into()), location: module.or(location) }
        }
    })
}

/// `(/tmp/x/prog+0x1a2b) (BuildId: ..)` -> `prog+0x1a2b`, so keys do not
/// depend on where the binary was built.
fn module_offset(loc: &str) -> Option<String> {
    let inner = loc.strip_prefix('(')?.split(')').next()?;
    let base = inner.rsplit('/').next()?;
    (!base.is_empty()).then(|| base.to_string())
}

/// Strip a trailing `:column` so `a.c:5:12` becomes `a.c:5`.
fn strip_column(loc: &str) -> String {
    let parts: Vec<&str> = loc.rsplitn(3, ':').collect();
    if parts.len() == 3 && parts[0].chars().all(|c| c.is_ascii_digit()) && parts[1].chars().all(|c| c.is_ascii_digit())
    {
        format!("{}:{}", parts[2], parts[1])
    } else {
        loc.to_string()
    }
}

/// Kind from an ASan error headline when no summary line is available.
fn asan_kind_from_headline(rest: &str) -> String {
    let rest = rest.trim();
    if let Some(r) = rest.strip_prefix("attempting ") {
        if r.starts_with("double-free") {
            return "double-free".into();
        }
        if r.starts_with("free on address which was not malloc") {
            return "bad-free".into();
        }
        return r.split_whitespace().next().unwrap_or("unknown").to_string();
    }
    if rest.starts_with("requested allocation size") {
        return "allocation-size-too-big".into();
    }
    if rest.starts_with("allocator is out of memory") || rest.starts_with("out of memory") {
        return "out-of-memory".into();
    }
    rest.split_whitespace().next().unwrap_or("unknown").trim_end_matches(':').to_string()
}

/// UBSan check name for a runtime-error message.
fn ubsan_kind(msg: &str) -> &'static str {
    const TABLE: &[(&str, &str)] = &[
        ("signed integer overflow", "signed-integer-overflow"),
        ("unsigned integer overflow", "unsigned-integer-overflow"),
        ("negation of", "signed-integer-overflow"),
        ("division by zero", "integer-divide-by-zero"),
        ("shift exponent", "shift-exponent"),
        ("left shift of", "shift-base"),
        ("null pointer passed as argument", "nonnull-attribute"),
        ("null pointer returned from function", "returns-nonnull-attribute"),
        ("load of null pointer", "null"),
        ("store to null pointer", "null"),
        ("member access within null pointer", "null"),
        ("member call on null pointer", "null"),
        ("reference binding to null pointer", "null"),
        ("applying non-zero offset", "pointer-overflow"),
        ("applying zero offset to null pointer", "pointer-overflow"),
        ("pointer index expression", "pointer-overflow"),
        ("addition of unsigned offset", "pointer-overflow"),
        ("subtraction of unsigned offset", "pointer-overflow"),
        ("misaligned address", "alignment"),
        ("with insufficient space for an object", "object-size"),
        ("which is not a valid value for type", "invalid-value"),
        ("execution reached an unreachable program point", "unreachable"),
        ("execution reached the end of a value-returning function", "return"),
        ("variable length array bound", "vla-bound"),
        ("is outside the range of representable values", "float-cast-overflow"),
        ("through pointer to incorrect function type", "function"),
        ("implicit conversion", "implicit-conversion"),
    ];
    if msg.starts_with("index ") && msg.contains("out of bounds") {
        return "bounds";
    }
    TABLE.iter().find(|(needle, _)| msg.contains(needle)).map(|(_, kind)| *kind).unwrap_or("undefined-behavior")
}

fn tool_of(name: &str) -> SanitizerTool {
    match name {
        "AddressSanitizer" | "HWAddressSanitizer" => SanitizerTool::Asan,
        "LeakSanitizer" => SanitizerTool::Lsan,
        "UndefinedBehaviorSanitizer" => SanitizerTool::Ubsan,
        _ => SanitizerTool::Other,
    }
}

/// Collect the first stack trace starting at `lines[start]`. Returns frames
/// and the index just past the trace.
fn collect_frames(lines: &[&str], mut i: usize, stop: impl Fn(&str) -> bool) -> (Vec<Frame>, usize) {
    let mut frames = Vec::new();
    while i < lines.len() {
        let line = lines[i];
        if stop(line) {
            break;
        }
        match parse_frame(line) {
            Some(f) => frames.push(f),
            None if !frames.is_empty() => break,
            None => {}
        }
        i += 1;
    }
    (frames, i)
}

fn is_block_start(line: &str) -> bool {
    header_re().is_match(line) || ubsan_re().is_match(line)
}

fn finish(
    tool: SanitizerTool,
    kind: String,
    frames: &[Frame],
    fallback_location: Option<String>,
    truncated: bool,
    run: &RunRef,
    opts: &ParseOptions,
) -> SanitizerAlert {
    let user: Vec<&Frame> = frames.iter().filter(|f| !is_runtime_frame(f)).collect();
    let mut top: Vec<String> = user.iter().take(opts.frame_depth).map(|f| f.function.clone()).collect();
    let location = user.first().and_then(|f| f.location.as_deref().map(strip_column)).or(fallback_location.clone());
    if top.is_empty() {
        if let Some(loc) = &fallback_location {
            top.push(loc.clone());
        }
    }
    let mut alert = SanitizerAlert::new(tool, kind, top, run.clone());
    alert.location = location;
    alert.truncated = truncated;
    alert
}

/// Parse every sanitizer report block in `log`.
pub fn parse_sanitizer_logs(log: &str, run: &RunRef, opts: &ParseOptions) -> Vec<SanitizerAlert> {
    let lines: Vec<&str> = log.lines().map(|l| l.trim_end_matches('\r')).collect();
    let mut alerts = Vec::new();
    let mut i = 0;
    while i < lines.len() {
        let line = lines[i];
        if let Some(caps) = header_re().captures(line) {
            let tool = tool_of(&caps[1]);
            let rest = caps[2].to_string();
            if tool == SanitizerTool::Lsan || rest.starts_with("detected memory leaks") {
                i = parse_leak_report(&lines, i + 1, run, opts, &mut alerts);
                continue;
            }
            // Body runs to SUMMARY or the next report.
            let mut end = i + 1;
            let mut summary_kind = None;
            while end < lines.len() {
                if let Some(s) = summary_re().captures(lines[end]) {
                    summary_kind = Some(s[2].to_string());
                    break;
                }
                if is_block_start(lines[end]) {
                    break;
                }
                end += 1;
            }
            let truncated = summary_kind.is_none();
            let (frames, _) = collect_frames(&lines[..end], i + 1, |_| false);
            let kind = summary_kind.unwrap_or_else(|| asan_kind_from_headline(&rest));
            let kind = if tool == SanitizerTool::Asan { kind } else { asan_kind_from_headline(&rest) };
            alerts.push(finish(tool, kind, &frames, None, truncated, run, opts));
            i = if truncated { end } else { end + 1 };
            continue;
        }
        if let Some(caps) = ubsan_re().captures(line) {
            let loc = strip_column(&caps[1]);
            let msg = caps[2].to_string();
            // Optional stack (print_stacktrace=1) and optional summary line.
            let (frames, mut next) = collect_frames(&lines, i + 1, |l| {
                is_block_start(l) || l.starts_with("SUMMARY:") || l.starts_with("==")
            });
            let mut kind = ubsan_kind(&msg).to_string();
            if let Some(s) = lines.get(next).and_then(|l| summary_re().captures(l)) {
                if &s[1] == "UndefinedBehaviorSanitizer" {
                    if &s[2] != "undefined-behavior" {
                        kind = s[2].to_string();
                    }
                    next += 1;
                }
            }
            // Without a printed stack, the frames stay empty and the source
            // location stands in for the top frame.
            let frames = if frames.iter().any(|f| f.location.is_some() || f.function != "<unknown>") {
                frames
            } else {
                Vec::new()
            };
            alerts.push(finish(SanitizerTool::Ubsan, kind, &frames, Some(loc), false, run, opts));
            i = next.max(i + 1);
            continue;
        }
        i += 1;
    }
    alerts
}

/// LeakSanitizer: one alert per direct leak (indirect leaks only when there
/// are no direct ones). Returns the index after the report.
fn parse_leak_report(
    lines: &[&str],
    mut i: usize,
    run: &RunRef,
    opts: &ParseOptions,
    out: &mut Vec<SanitizerAlert>,
) -> usize {
    let mut direct = Vec::new();
    let mut indirect = Vec::new();
    let mut saw_summary = false;
    while i < lines.len() {
        let line = lines[i];
        if summary_re().is_match(line) {
            saw_summary = true;
            i += 1;
            break;
        }
        if is_block_start(line) {
            break;
        }
        if let Some(caps) = leak_re().captures(line) {
            let is_direct = &caps[1] == "Direct";
            let (frames, next) = collect_frames(lines, i + 1, |l| {
                leak_re().is_match(l) || summary_re().is_match(l) || is_block_start(l)
            });
            if is_direct {
                direct.push(frames);
            } else {
                indirect.push(frames);
            }
            i = next;
            continue;
        }
        i += 1;
    }
    let (kind, groups) = if direct.is_empty() { ("indirect-leak", indirect) } else { ("memory-leak", direct) };
    let truncated = !saw_summary;
    if groups.is_empty() {
        out.push(finish(SanitizerTool::Lsan, kind.to_string(), &[], None, truncated, run, opts));
    }
    for frames in groups {
        out.push(finish(SanitizerTool::Lsan, kind.to_string(), &frames, None, truncated, run, opts));
    }
    i
}

#[cfg(test)]
mod tests {
    use super::super::{AlertSource, Category};
    use super::*;

    fn run() -> RunRef {
        RunRef::new(AlertSource::Test, 0, "t")
    }

    const HBO: &str = "\
=================================================================
==656==ERROR: AddressSanitizer: heap-buffer-overflow on address 0x502000000020 at pc 0x563961468467 bp 0x7ffcb72acbe0 sp 0x7ffcb72acbd0
WRITE of size 4 at 0x502000000020 thread T0
    #0 0x563961468466 in store_item /tmp/t.c:5
    #1 0x563961468500 in main /tmp/t.c:12
    #2 0x7effa2c29d8f in __libc_start_call_main ../sysdeps/nptl/libc_start_call_main.h:58
    #3 0x563961468224 in _start (/tmp/t+0x2224)

0x502000000020 is located 0 bytes to the right of 16-byte region [0x502000000010,0x502000000020)
allocated by thread T0 here:
    #0 0x7effa38b4887 in __interceptor_malloc ../../../../src/libsanitizer/asan/asan_malloc_linux.cpp:145
    #1 0x563961468306 in main /tmp/t.c:4

SUMMARY: AddressSanitizer: heap-buffer-overflow /tmp/t.c:5 in store_item
==656==ABORTING
";

    #[test]
    fn single_asan_block() {
        let a = parse_sanitizer_logs(HBO, &run(), &ParseOptions::default());
        assert_eq!(a.len(), 1);
        assert_eq!(a[0].kind, "heap-buffer-overflow");
        assert_eq!(a[0].category, Category::Spatial);
        assert_eq!(a[0].top_frames, ["store_item", "main", "__libc_start_call_main"]);
        assert_eq!(a[0].location.as_deref(), Some("/tmp/t.c:5"));
        assert!(!a[0].truncated);
    }

    #[test]
    fn clean_log_is_empty() {
        assert!(parse_sanitizer_logs("make: Nothing to be done.\nPASS 20/20\n", &run(), &ParseOptions::default())
            .is_empty());
    }

    #[test]
    fn truncated_block_is_flagged() {
        let cut = &HBO[..HBO.find("\n    #1").unwrap()];
        let a = parse_sanitizer_logs(cut, &run(), &ParseOptions::default());
        assert_eq!(a.len(), 1);
        assert!(a[0].truncated);
        assert_eq!(a[0].kind, "heap-buffer-overflow");
    }

    #[test]
    fn ubsan_without_stack_uses_location() {
        let log =
            "t.c:7:48: runtime error: signed integer overflow: 2147483647 + 2 cannot be represented in type 'int'\n";
        let a = parse_sanitizer_logs(log, &run(), &ParseOptions::default());
        assert_eq!(a.len(), 1);
        assert_eq!(a[0].kind, "signed-integer-overflow");
        assert_eq!(a[0].tool, SanitizerTool::Ubsan);
        assert_eq!(a[0].top_frames, ["t.c:7"]);
    }

    #[test]
    fn leak_report_one_alert_per_direct_leak() {
        let log = "\
==663==ERROR: LeakSanitizer: detected memory leaks

Direct leak of 16 byte(s) in 1 object(s) allocated from:
    #0 0x7fcab3ab4887 in __interceptor_malloc ../../../../src/libsanitizer/asan/asan_malloc_linux.cpp:145
    #1 0x5566f186f306 in make_buf /tmp/t.c:4
    #2 0x7fcab2e29d8f in main /tmp/t.c:20

Direct leak of 10 byte(s) in 1 object(s) allocated from:
    #0 0x7fcab3ab4887 in __interceptor_malloc ../../../../src/libsanitizer/asan/asan_malloc_linux.cpp:145
    #1 0x5566f186f7ab in dup_name /tmp/t.c:8

Indirect leak of 4 byte(s) in 1 object(s) allocated from:
    #0 0x7fcab3ab4887 in __interceptor_malloc ../../../../src/libsanitizer/asan/asan_malloc_linux.cpp:145
    #1 0x5566f186f7ab in dup_name /tmp/t.c:9

SUMMARY: AddressSanitizer: 30 byte(s) leaked in 3 allocation(s).
";
        let a = parse_sanitizer_logs(log, &run(), &ParseOptions::default());
        assert_eq!(a.len(), 2);
        assert!(a.iter().all(|x| x.category == Category::Leak && x.kind == "memory-leak"));
        assert_eq!(a[0].top_frames, ["make_buf", "main"]);
        assert_eq!(a[1].top_frames, ["dup_name"]);
    }
}
