//! A small Java tokenizer and a brace-matching method segmenter. It knows
//! enough of the grammar to find classes, methods, their annotations and
//! bodies; it does not parse expressions.

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TokenKind {
    Ident,
    Number,
    Str,
    Char,
    Punct,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Token {
    pub kind: TokenKind,
    pub text: String,
    pub line: u32,
}

impl Token {
    fn is(&self, text: &str) -> bool {
        self.text == text
    }

    fn is_ident(&self) -> bool {
        self.kind == TokenKind::Ident
    }
}

const MULTI_CHAR_PUNCT: [&str; 22] = [
    ">>>=", "<<=", ">>=", ">>>", "...", "->", "::", "++", "--", "&&", "||", "==", "!=", "<=", ">=", "+=", "-=", "*=",
    "/=", "&=", "|=", "^=",
];

/// Splits Java source into tokens, dropping whitespace and comments.
/// Unterminated literals and comments run to the end of input.
pub fn tokenize(src: &str) -> Vec<Token> {
    let chars: Vec<char> = src.chars().collect();
    let mut tokens = Vec::new();
    let mut i = 0;
    let mut line = 1u32;
    let n = chars.len();
    while i < n {
        let c = chars[i];
        if c == '\n' {
            line += 1;
            i += 1;
            continue;
        }
        if c.is_whitespace() {
            i += 1;
            continue;
        }
        if c == '/' && i + 1 < n && chars[i + 1] == '/' {
            while i < n && chars[i] != '\n' {
                i += 1;
            }
            continue;
        }
        if c == '/' && i + 1 < n && chars[i + 1] == '*' {
            i += 2;
            while i < n && !(chars[i] == '*' && i + 1 < n && chars[i + 1] == '/') {
                if chars[i] == '\n' {
                    line += 1;
                }
                i += 1;
            }
            i = (i + 2).min(n);
            continue;
        }
        let start = i;
        let start_line = line;
        let kind = if c.is_alphabetic() || c == '_' || c == '$' {
            while i < n && (chars[i].is_alphanumeric() || chars[i] == '_' || chars[i] == '$') {
                i += 1;
            }
            TokenKind::Ident
        } else if c.is_ascii_digit() {
            while i < n && (chars[i].is_alphanumeric() || chars[i] == '.' || chars[i] == '_') {
                i += 1;
            }
            TokenKind::Number
        } else if c == '"' {
            if i + 2 < n && chars[i + 1] == '"' && chars[i + 2] == '"' {
                i += 3;
                while i < n && !(chars[i] == '"' && i + 2 < n && chars[i + 1] == '"' && chars[i + 2] == '"') {
                    if chars[i] == '\n' {
                        line += 1;
                    }
                    i += if chars[i] == '\\' { 2 } else { 1 };
                }
                i = (i + 3).min(n);
            } else {
                i = skip_quoted(&chars, i, '"');
            }
            TokenKind::Str
        } else if c == '\'' {
            i = skip_quoted(&chars, i, '\'');
            TokenKind::Char
        } else {
            let rest: String = chars[i..n.min(i + 4)].iter().collect();
            let len = MULTI_CHAR_PUNCT.iter().find(|p| rest.starts_with(*p)).map_or(1, |p| p.len());
            i += len;
            TokenKind::Punct
        };
        let end = i.min(n);
        tokens.push(Token { kind, text: chars[start..end].iter().collect(), line: start_line });
    }
    tokens
}

fn skip_quoted(chars: &[char], start: usize, quote: char) -> usize {
    let mut i = start + 1;
    while i < chars.len() && chars[i] != quote && chars[i] != '\n' {
        i += if chars[i] == '\\' { 2 } else { 1 };
    }
    (i + 1).min(chars.len())
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct JavaMethod {
    /// Package-qualified class name; nested classes joined with `$`.
    pub class_name: String,
    pub name: String,
    /// Simple names of the annotations on the declaration.
    pub annotations: Vec<String>,
    pub params: Vec<String>,
    /// Token texts between the body braces.
    pub body: Vec<String>,
    pub line: u32,
}

impl JavaMethod {
    pub fn is_test(&self) -> bool {
        self.annotations.iter().any(|a| matches!(a.as_str(), "Test" | "ParameterizedTest" | "RepeatedTest"))
    }

    /// Number of assertion calls: `assert*` identifiers and `fail(`.
    pub fn assertion_count(&self) -> usize {
        self.body
            .iter()
            .enumerate()
            .filter(|(i, t)| {
                let next_paren = self.body.get(i + 1).is_some_and(|n| n == "(");
                (t.starts_with("assert") && (next_paren || t.as_str() == "assert"))
                    || (t.as_str() == "fail" && next_paren)
            })
            .count()
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct JavaFile {
    pub package: Option<String>,
    pub methods: Vec<JavaMethod>,
}

impl JavaFile {
    pub fn method(&self, class_name: &str, name: &str) -> Option<&JavaMethod> {
        self.methods.iter().find(|m| m.class_name == class_name && m.name == name)
    }
}

const TYPE_KEYWORDS: [&str; 4] = ["class", "interface", "enum", "record"];
const NOT_METHOD_NAMES: [&str; 10] =
    ["if", "for", "while", "switch", "catch", "synchronized", "return", "new", "try", "else"];

enum Scope {
    Class(String),
    Other,
}

pub fn parse(src: &str) -> JavaFile {
    segment(&tokenize(src))
}

pub fn segment(tokens: &[Token]) -> JavaFile {
    let mut file = JavaFile::default();
    let mut scopes: Vec<Scope> = Vec::new();
    let mut header_start = 0;
    let mut i = 0;
    while i < tokens.len() {
        let t = &tokens[i];
        match t.text.as_str() {
            "package" if scopes.is_empty() && t.is_ident() => {
                let mut j = i + 1;
                let mut name = String::new();
                while j < tokens.len() && !tokens[j].is(";") {
                    name.push_str(&tokens[j].text);
                    j += 1;
                }
                file.package = Some(name);
                i = j;
                header_start = i + 1;
            }
            ";" => header_start = i + 1,
            "}" if t.kind == TokenKind::Punct => {
                scopes.pop();
                header_start = i + 1;
            }
            "{" if t.kind == TokenKind::Punct => {
                let header = &tokens[header_start..i];
                let in_class = matches!(scopes.last(), Some(Scope::Class(_)));
                if let Some(name) = type_declaration(header) {
                    let qualified = match scopes.iter().rev().find_map(|s| match s {
                        Scope::Class(c) => Some(c.clone()),
                        Scope::Other => None,
                    }) {
                        Some(outer) => format!("{outer}${name}"),
                        None => match &file.package {
                            Some(p) => format!("{p}.{name}"),
                            None => name,
                        },
                    };
                    scopes.push(Scope::Class(qualified));
                } else if let (true, Some(decl)) = (in_class, method_declaration(header)) {
                    let close = matching_brace(tokens, i);
                    let Some(Scope::Class(class_name)) = scopes.last() else { unreachable!() };
                    file.methods.push(JavaMethod {
                        class_name: class_name.clone(),
                        name: decl.name,
                        annotations: decl.annotations,
                        params: decl.params,
                        body: tokens[i + 1..close].iter().map(|t| t.text.clone()).collect(),
                        line: t.line,
                    });
                    i = close;
                    header_start = i + 1;
                } else {
                    scopes.push(Scope::Other);
                }
                header_start = header_start.max(i + 1);
            }
            _ => {}
        }
        i += 1;
    }
    file
}

fn matching_brace(tokens: &[Token], open: usize) -> usize {
    let mut depth = 0usize;
    for (j, t) in tokens.iter().enumerate().skip(open) {
        if t.kind != TokenKind::Punct {
            continue;
        }
        match t.text.as_str() {
            "{" => depth += 1,
            "}" => {
                depth -= 1;
                if depth == 0 {
                    return j;
                }
            }
            _ => {}
        }
    }
    tokens.len()
}

fn type_declaration(header: &[Token]) -> Option<String> {
    header
        .windows(2)
        .find_map(|w| {
            let is_kw = w[0].is_ident() && TYPE_KEYWORDS.contains(&w[0].text.as_str());
            // `x.class` is a literal, not a declaration.
            (is_kw && w[1].is_ident()).then(|| w[1].text.clone())
        })
        .filter(|_| !header.iter().any(|t| t.is("=") || t.is("new")))
}

struct MethodDecl {
    name: String,
    annotations: Vec<String>,
    params: Vec<String>,
}

fn method_declaration(header: &[Token]) -> Option<MethodDecl> {
    let close = header.iter().rposition(|t| t.is(")"))?;
    let tail = &header[close + 1..];
    let tail_ok =
        tail.is_empty() || (tail[0].is("throws") && tail[1..].iter().all(|t| t.is_ident() || t.is(",") || t.is(".")));
    if !tail_ok {
        return None;
    }
    let mut depth = 0i32;
    let mut open = None;
    for j in (0..=close).rev() {
        match header[j].text.as_str() {
            ")" => depth += 1,
            "(" => {
                depth -= 1;
                if depth == 0 {
                    open = Some(j);
                    break;
                }
            }
            _ => {}
        }
    }
    let open = open?;
    if open == 0 {
        return None;
    }
    let name = &header[open - 1];
    if !name.is_ident() || NOT_METHOD_NAMES.contains(&name.text.as_str()) {
        return None;
    }
    let before = &header[..open - 1];
    if before.last().is_some_and(|t| t.is("@") || t.is(".")) || before.iter().any(|t| t.is("=")) {
        return None;
    }
    let mut annotations = Vec::new();
    let mut j = 0;
    while j < before.len() {
        if before[j].is("@") {
            // `@org.junit.Test` names the annotation by its last segment.
            let mut k = j + 1;
            let mut last = None;
            if before.get(k).is_some_and(Token::is_ident) {
                last = Some(before[k].text.clone());
                k += 1;
                while k + 1 < before.len() && before[k].is(".") && before[k + 1].is_ident() {
                    last = Some(before[k + 1].text.clone());
                    k += 2;
                }
            }
            annotations.extend(last);
            j = k.max(j + 1);
        } else {
            j += 1;
        }
    }
    Some(MethodDecl {
        name: name.text.clone(),
        annotations,
        params: header[open + 1..close].iter().map(|t| t.text.clone()).collect(),
    })
}
