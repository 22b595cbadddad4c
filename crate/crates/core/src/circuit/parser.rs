//! Line-oriented circuit parser.
//!
//! Each non-blank line holds one statement; `#` starts a comment. Arguments are
//! either positional words or `key=value` pairs.

use crate::elements::WavePlateKind;
use crate::state::{Band, PathId, Polarization, SourceId};

use super::ast::{BandSel, CircuitAst, Statement, Stmt, Value};
use super::diagnostics::{Diagnostic, Diagnostics, Span};

pub const E_UNKNOWN_KEYWORD: &str = "E_UNKNOWN_KEYWORD";
pub const E_ARITY: &str = "E_ARITY";
pub const E_NUMBER: &str = "E_NUMBER";
pub const E_BAD_VALUE: &str = "E_BAD_VALUE";
pub const E_UNKNOWN_ARG: &str = "E_UNKNOWN_ARG";
pub const E_DUP_ARG: &str = "E_DUP_ARG";
pub const E_SOURCE_ID: &str = "E_SOURCE_ID";
pub const E_MULTI_DETECT: &str = "E_MULTI_DETECT";
pub const W_DEFAULT_BAND: &str = "W_DEFAULT_BAND";

/// Successful parse; `warnings` holds only warning-level diagnostics.
#[derive(Debug, Clone)]
pub struct Parsed {
    pub ast: CircuitAst,
    pub warnings: Diagnostics,
}

#[derive(Debug, Clone, Copy)]
struct Token<'a> {
    text: &'a str,
    span: Span,
}

fn tokenize(line: &str, line_no: usize) -> Vec<Token<'_>> {
    let code = match line.find('#') {
        Some(i) => &line[..i],
        None => line,
    };
    let mut tokens = Vec::new();
    let mut start: Option<(usize, usize)> = None; // (byte, col)
    let mut col = 0;
    for (byte, ch) in code.char_indices() {
        col += 1;
        if ch.is_whitespace() {
            if let Some((b, c)) = start.take() {
                tokens.push(Token {
                    text: &code[b..byte],
                    span: Span::new(line_no, c, col - c),
                });
            }
        } else if start.is_none() {
            start = Some((byte, col));
        }
    }
    if let Some((b, c)) = start {
        tokens.push(Token {
            text: &code[b..],
            span: Span::new(line_no, c, col + 1 - c),
        });
    }
    split_colon_labels(tokens)
}

/// `signal:b` becomes `signal:` `b` so both spellings parse the same.
fn split_colon_labels(tokens: Vec<Token<'_>>) -> Vec<Token<'_>> {
    let mut out = Vec::with_capacity(tokens.len());
    for t in tokens {
        let label = ["signal:", "idler:"]
            .into_iter()
            .find(|l| t.text.len() > l.len() && t.text.starts_with(l));
        match label {
            Some(l) => {
                let n = l.chars().count();
                out.push(Token {
                    text: &t.text[..l.len()],
                    span: Span::new(t.span.line, t.span.col, n),
                });
                out.push(Token {
                    text: &t.text[l.len()..],
                    span: Span::new(t.span.line, t.span.col + n, t.span.len - n),
                });
            }
            None => out.push(t),
        }
    }
    out
}

fn is_ident(s: &str) -> bool {
    let mut chars = s.chars();
    matches!(chars.next(), Some(c) if c.is_ascii_alphabetic() || c == '_')
        && chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

fn is_path(s: &str) -> bool {
    !s.is_empty()
        && s.chars()
            .all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '\'')
}

struct KeyArg<'a> {
    key: &'a str,
    value: &'a str,
    key_span: Span,
    value_span: Span,
}

/// Statement-level parsing context.
struct StmtCx<'a, 'd> {
    keyword: &'a str,
    span: Span,
    positional: Vec<Token<'a>>,
    keys: Vec<KeyArg<'a>>,
    diags: &'d mut Diagnostics,
    failed: bool,
}

impl<'a, 'd> StmtCx<'a, 'd> {
    fn error(&mut self, code: &'static str, span: Span, msg: impl Into<String>) {
        self.diags.push(Diagnostic::error(code, span, msg));
        self.failed = true;
    }

    fn expect_shape(&mut self, n_positional: usize, allowed_keys: &[&str], usage: &str) -> bool {
        if self.positional.len() != n_positional {
            let msg = format!(
                "`{}` takes {n_positional} positional argument(s), found {}; usage: {usage}",
                self.keyword,
                self.positional.len()
            );
            self.error(E_ARITY, self.span, msg);
            return false;
        }
        let mut seen: Vec<&str> = Vec::new();
        let keys: Vec<(&str, Span)> = self.keys.iter().map(|k| (k.key, k.key_span)).collect();
        for (key, span) in keys {
            if !allowed_keys.contains(&key) {
                self.error(
                    E_UNKNOWN_ARG,
                    span,
                    format!("`{}` does not take `{key}=`", self.keyword),
                );
            } else if seen.contains(&key) {
                self.error(E_DUP_ARG, span, format!("`{key}=` given twice"));
            }
            seen.push(key);
        }
        !self.failed
    }

    fn key(&self, key: &str) -> Option<&KeyArg<'a>> {
        self.keys.iter().find(|k| k.key == key)
    }

    fn required(&mut self, key: &str, usage: &str) -> Option<(&'a str, Span)> {
        match self.key(key) {
            Some(k) => Some((k.value, k.value_span)),
            None => {
                let msg = format!("missing `{key}=`; usage: {usage}");
                self.error(E_ARITY, self.span, msg);
                None
            }
        }
    }

    fn path(&mut self, text: &str, span: Span) -> Option<PathId> {
        if is_path(text) {
            PathId::new(text).ok()
        } else {
            self.error(
                E_BAD_VALUE,
                span,
                format!("`{text}` is not a valid path name"),
            );
            None
        }
    }

    fn pos_path(&mut self, i: usize) -> Option<PathId> {
        let t = self.positional[i];
        self.path(t.text, t.span)
    }

    fn expect_token(&mut self, i: usize, token: &str) {
        let t = self.positional[i];
        if t.text != token {
            self.error(
                E_ARITY,
                t.span,
                format!("expected `{token}`, found `{}`", t.text),
            );
        }
    }

    fn pol(&mut self, text: &str, span: Span) -> Option<Polarization> {
        match text.parse() {
            Ok(p) => Some(p),
            Err(()) => {
                self.error(
                    E_BAD_VALUE,
                    span,
                    format!("polarization must be H or V, found `{text}`"),
                );
                None
            }
        }
    }

    fn band(&mut self, text: &str, span: Span) -> Option<Band> {
        match text.parse() {
            Ok(b) => Some(b),
            Err(()) => {
                self.error(
                    E_BAD_VALUE,
                    span,
                    format!("band must be `signal` or `idler`, found `{text}`"),
                );
                None
            }
        }
    }

    fn band_sel(&mut self, default_warning: bool) -> Option<Option<BandSel>> {
        match self.key("band").map(|k| (k.value, k.value_span)) {
            Some((v, span)) => match v {
                "signal" => Some(Some(BandSel::Signal)),
                "idler" => Some(Some(BandSel::Idler)),
                "both" => Some(Some(BandSel::Both)),
                _ => {
                    self.error(
                        E_BAD_VALUE,
                        span,
                        format!("band must be `signal`, `idler` or `both`, found `{v}`"),
                    );
                    None
                }
            },
            None => {
                if default_warning {
                    self.diags.push(Diagnostic::warning(
                        W_DEFAULT_BAND,
                        self.span,
                        format!("`{}` without `band=` acts on both bands", self.keyword),
                    ));
                }
                Some(None)
            }
        }
    }

    fn number(&mut self, text: &str, span: Span) -> Option<f64> {
        match text.parse::<f64>() {
            Ok(x) if x.is_finite() => Some(x),
            _ => {
                self.error(E_NUMBER, span, format!("malformed number `{text}`"));
                None
            }
        }
    }

    fn value(&mut self, text: &str, span: Span) -> Option<Value> {
        if let Some(name) = text.strip_prefix('$') {
            if is_ident(name) {
                return Some(Value::Param(name.to_string()));
            }
            self.error(
                E_BAD_VALUE,
                span,
                format!("`{text}` is not a valid parameter name"),
            );
            return None;
        }
        self.number(text, span).map(Value::Num)
    }
}

fn source_id_of(name: &str) -> Option<SourceId> {
    let digits: String = name
        .chars()
        .rev()
        .take_while(|c| c.is_ascii_digit())
        .collect::<Vec<_>>()
        .into_iter()
        .rev()
        .collect();
    let prefix = &name[..name.len() - digits.len()];
    if digits.is_empty() || !(prefix.is_empty() || is_ident(prefix)) {
        return None;
    }
    digits
        .parse::<u8>()
        .ok()
        .and_then(|d| SourceId::new(d).ok())
}

fn parse_statement(cx: &mut StmtCx<'_, '_>) -> Option<Stmt> {
    match cx.keyword {
        "source" => {
            let usage = "source ID signal=PATH idler=PATH pol=H|V [phase=NUM]";
            if !cx.expect_shape(1, &["signal", "idler", "pol", "phase"], usage) {
                return None;
            }
            let name_tok = cx.positional[0];
            let id = source_id_of(name_tok.text);
            if id.is_none() {
                cx.error(
                    E_SOURCE_ID,
                    name_tok.span,
                    format!("source name `{}` must end in 1 or 2", name_tok.text),
                );
            }
            let signal = cx.required("signal", usage);
            let idler = cx.required("idler", usage);
            let pol = cx.required("pol", usage);
            let signal = signal.and_then(|(t, s)| cx.path(t, s));
            let idler = idler.and_then(|(t, s)| cx.path(t, s));
            let pol = pol.and_then(|(t, s)| cx.pol(t, s));
            let phase = match cx.key("phase").map(|k| (k.value, k.value_span)) {
                Some((t, s)) => Some(cx.number(t, s)?),
                None => None,
            };
            Some(Stmt::Source {
                name: name_tok.text.to_string(),
                id: id?,
                signal: signal?,
                idler: idler?,
                pol: pol?,
                phase,
            })
        }
        "prepare" => {
            let usage = "prepare PATH signal|idler alpha=VAL beta=VAL gamma=VAL";
            if !cx.expect_shape(2, &["alpha", "beta", "gamma"], usage) {
                return None;
            }
            let path = cx.pos_path(0);
            let b = cx.positional[1];
            let band = cx.band(b.text, b.span);
            let alpha = cx.required("alpha", usage);
            let beta = cx.required("beta", usage);
            let gamma = cx.required("gamma", usage);
            let alpha = alpha.and_then(|(t, s)| cx.value(t, s));
            let beta = beta.and_then(|(t, s)| cx.value(t, s));
            let gamma = gamma.and_then(|(t, s)| cx.value(t, s));
            Some(Stmt::Prepare {
                path: path?,
                band: band?,
                alpha: alpha?,
                beta: beta?,
                gamma: gamma?,
            })
        }
        kw @ ("hwp" | "qwp") => {
            let usage = "hwp|qwp PATH angle=VAL [band=signal|idler|both]";
            if !cx.expect_shape(1, &["angle", "band"], usage) {
                return None;
            }
            let path = cx.pos_path(0);
            let angle = cx
                .required("angle", usage)
                .and_then(|(t, s)| cx.value(t, s));
            let band = cx.band_sel(true);
            let kind = if kw == "hwp" {
                WavePlateKind::Half
            } else {
                WavePlateKind::Quarter
            };
            Some(Stmt::WavePlate {
                kind,
                path: path?,
                angle: angle?,
                band: band?,
            })
        }
        "bs" => {
            if !cx.expect_shape(4, &[], "bs PATH -> PATH PATH") {
                return None;
            }
            cx.expect_token(1, "->");
            let input = cx.pos_path(0);
            let out_t = cx.pos_path(2);
            let out_r = cx.pos_path(3);
            if cx.failed {
                return None;
            }
            Some(Stmt::Bs {
                input: input?,
                out_t: out_t?,
                out_r: out_r?,
            })
        }
        "bs2" => {
            if !cx.expect_shape(5, &[], "bs2 PATH PATH -> PATH PATH") {
                return None;
            }
            cx.expect_token(2, "->");
            let in_a = cx.pos_path(0);
            let in_b = cx.pos_path(1);
            let out_a = cx.pos_path(3);
            let out_b = cx.pos_path(4);
            if cx.failed {
                return None;
            }
            Some(Stmt::Bs2 {
                in_a: in_a?,
                in_b: in_b?,
                out_a: out_a?,
                out_b: out_b?,
            })
        }
        "dm" => {
            if !cx.expect_shape(6, &[], "dm PATH -> signal: PATH idler: PATH") {
                return None;
            }
            cx.expect_token(1, "->");
            cx.expect_token(2, "signal:");
            cx.expect_token(4, "idler:");
            let input = cx.pos_path(0);
            let signal = cx.pos_path(3);
            let idler = cx.pos_path(5);
            if cx.failed {
                return None;
            }
            Some(Stmt::Dm {
                input: input?,
                signal: signal?,
                idler: idler?,
            })
        }
        "phase" => {
            let usage = "phase PATH value=VAL [band=signal|idler|both]";
            if !cx.expect_shape(1, &["value", "band"], usage) {
                return None;
            }
            let path = cx.pos_path(0);
            let value = cx
                .required("value", usage)
                .and_then(|(t, s)| cx.value(t, s));
            let band = cx.band_sel(false);
            Some(Stmt::Phase {
                path: path?,
                value: value?,
                band: band?,
            })
        }
        "merge" => {
            if !cx.expect_shape(3, &[], "merge PATH H|V signal|idler") {
                return None;
            }
            let path = cx.pos_path(0);
            let (p, b) = (cx.positional[1], cx.positional[2]);
            let pol = cx.pol(p.text, p.span);
            let band = cx.band(b.text, b.span);
            Some(Stmt::Merge {
                path: path?,
                pol: pol?,
                band: band?,
            })
        }
        "detect" => {
            if !cx.expect_shape(2, &[], "detect PATH signal|idler") {
                return None;
            }
            let path = cx.pos_path(0);
            let b = cx.positional[1];
            let band = cx.band(b.text, b.span);
            Some(Stmt::Detect {
                path: path?,
                band: band?,
            })
        }
        other => {
            let span = Span::new(cx.span.line, cx.span.col, other.chars().count());
            cx.error(
                E_UNKNOWN_KEYWORD,
                span,
                format!("unknown statement `{other}`"),
            );
            None
        }
    }
}

/// Parses a circuit file. On failure the returned diagnostics contain at least
/// one error, plus any warnings seen along the way.
pub fn parse(text: &str) -> Result<Parsed, Diagnostics> {
    let mut diags = Diagnostics::new();
    let mut statements = Vec::new();
    let mut first_detect: Option<Span> = None;

    for (i, raw_line) in text.split('\n').enumerate() {
        let line = raw_line.strip_suffix('\r').unwrap_or(raw_line);
        let tokens = tokenize(line, i + 1);
        let Some((head, rest)) = tokens.split_first() else {
            continue;
        };
        let last = tokens.last().unwrap_or(head);
        let span = Span::new(
            head.span.line,
            head.span.col,
            last.span.col + last.span.len - head.span.col,
        );
        let mut positional = Vec::new();
        let mut keys = Vec::new();
        for t in rest {
            match t.text.split_once('=') {
                Some((k, v)) => {
                    let klen = k.chars().count();
                    keys.push(KeyArg {
                        key: k,
                        value: v,
                        key_span: Span::new(t.span.line, t.span.col, klen),
                        value_span: Span::new(
                            t.span.line,
                            t.span.col + klen + 1,
                            v.chars().count(),
                        ),
                    });
                }
                None => positional.push(*t),
            }
        }
        let mut cx = StmtCx {
            keyword: head.text,
            span,
            positional,
            keys,
            diags: &mut diags,
            failed: false,
        };
        let stmt = parse_statement(&mut cx);
        let failed = cx.failed;
        if let (Some(stmt), false) = (stmt, failed) {
            if matches!(stmt, Stmt::Detect { .. }) {
                match first_detect {
                    Some(prev) => {
                        diags.push(Diagnostic::error(
                            E_MULTI_DETECT,
                            span,
                            format!("second `detect` statement; the first is at {prev}"),
                        ));
                        continue;
                    }
                    None => first_detect = Some(span),
                }
            }
            statements.push(Statement { stmt, span });
        }
    }

    if diags.has_errors() {
        Err(diags)
    } else {
        Ok(Parsed {
            ast: CircuitAst { statements },
            warnings: diags,
        })
    }
}
