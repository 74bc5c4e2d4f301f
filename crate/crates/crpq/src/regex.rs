//! Regular expressions over symbol names.
//!
//! Grammar: `eps | SYMBOL | 'name' | ^SYMBOL | (R) | R R | R + R | R* | R^+`
//! with star/plus binding tighter than concatenation, which binds tighter than
//! union. An unquoted symbol is one non-whitespace character outside
//! `()+*^'[]`. A hat prefix `^` names the hatted twin of a symbol and is stored
//! as part of the symbol name.

use std::collections::BTreeSet;
use std::fmt;

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Regex {
    Eps,
    Sym(String),
    Concat(Box<Regex>, Box<Regex>),
    Union(Box<Regex>, Box<Regex>),
    Plus(Box<Regex>),
    Star(Box<Regex>),
}

impl Regex {
    pub fn sym(s: impl Into<String>) -> Regex {
        Regex::Sym(s.into())
    }

    pub fn concat(a: Regex, b: Regex) -> Regex {
        Regex::Concat(Box::new(a), Box::new(b))
    }

    pub fn union(a: Regex, b: Regex) -> Regex {
        Regex::Union(Box::new(a), Box::new(b))
    }

    pub fn plus(a: Regex) -> Regex {
        Regex::Plus(Box::new(a))
    }

    pub fn star(a: Regex) -> Regex {
        Regex::Star(Box::new(a))
    }

    /// Concatenation of a nonempty list; `eps` for an empty one.
    pub fn seq(parts: impl IntoIterator<Item = Regex>) -> Regex {
        parts.into_iter().reduce(Regex::concat).unwrap_or(Regex::Eps)
    }

    /// The word `s1 s2 .. sk` as a regex; `eps` for the empty word.
    pub fn word<S: AsRef<str>>(symbols: &[S]) -> Regex {
        Regex::seq(symbols.iter().map(|s| Regex::sym(s.as_ref())))
    }

    /// Union of a list; `None` for an empty list (the empty language has no syntax).
    pub fn alt(parts: impl IntoIterator<Item = Regex>) -> Option<Regex> {
        parts.into_iter().reduce(Regex::union)
    }

    pub fn parse(text: &str) -> Result<Regex> {
        let tokens = tokenize(text)?;
        let mut p = Parser { tokens, pos: 0, len: text.len() };
        if p.tokens.is_empty() {
            return Err(Error::syntax(0, "empty expression (write `eps` for the empty word)"));
        }
        let r = p.union()?;
        if let Some((pos, t)) = p.tokens.get(p.pos) {
            return Err(Error::syntax(*pos, format!("unexpected `{t}`")));
        }
        Ok(r)
    }

    pub fn nullable(&self) -> bool {
        match self {
            Regex::Eps | Regex::Star(_) => true,
            Regex::Sym(_) => false,
            Regex::Concat(a, b) => a.nullable() && b.nullable(),
            Regex::Union(a, b) => a.nullable() || b.nullable(),
            Regex::Plus(a) => a.nullable(),
        }
    }

    pub fn is_star_free(&self) -> bool {
        match self {
            Regex::Eps | Regex::Sym(_) => true,
            Regex::Concat(a, b) | Regex::Union(a, b) => a.is_star_free() && b.is_star_free(),
            Regex::Plus(_) | Regex::Star(_) => false,
        }
    }

    pub fn alphabet(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        self.collect_alphabet(&mut out);
        out
    }

    fn collect_alphabet(&self, out: &mut BTreeSet<String>) {
        match self {
            Regex::Eps => {}
            Regex::Sym(s) => {
                out.insert(s.clone());
            }
            Regex::Concat(a, b) | Regex::Union(a, b) => {
                a.collect_alphabet(out);
                b.collect_alphabet(out);
            }
            Regex::Plus(a) | Regex::Star(a) => a.collect_alphabet(out),
        }
    }

    pub fn depth(&self) -> usize {
        match self {
            Regex::Eps | Regex::Sym(_) => 0,
            Regex::Concat(a, b) | Regex::Union(a, b) => 1 + a.depth().max(b.depth()),
            Regex::Plus(a) | Regex::Star(a) => 1 + a.depth(),
        }
    }

    /// A regex for `L(self) \ {ε}`, or `None` when that language is empty.
    pub fn nonempty_part(&self) -> Option<Regex> {
        match self {
            Regex::Eps => None,
            Regex::Sym(_) => Some(self.clone()),
            Regex::Union(a, b) => match (a.nonempty_part(), b.nonempty_part()) {
                (Some(x), Some(y)) => Some(Regex::union(x, y)),
                (x, y) => x.or(y),
            },
            Regex::Concat(a, b) => {
                if !a.nullable() || !b.nullable() {
                    return Some(self.clone());
                }
                let left = a.nonempty_part().map(|x| Regex::concat(x, (**b).clone()));
                let right = b.nonempty_part().map(|y| Regex::concat((**a).clone(), y));
                match (left, right) {
                    (Some(x), Some(y)) => Some(Regex::union(x, y)),
                    (x, y) => x.or(y),
                }
            }
            Regex::Plus(a) | Regex::Star(a) => a.nonempty_part().map(Regex::plus),
        }
    }

    /// Brzozowski derivative by one symbol; `None` for the empty language.
    pub fn derivative(&self, sym: &str) -> Option<Regex> {
        let cat = |x: Regex, y: Regex| if x == Regex::Eps { y } else { Regex::concat(x, y) };
        match self {
            Regex::Eps => None,
            Regex::Sym(s) => (s == sym).then_some(Regex::Eps),
            Regex::Union(a, b) => match (a.derivative(sym), b.derivative(sym)) {
                (Some(x), Some(y)) => Some(Regex::union(x, y)),
                (x, y) => x.or(y),
            },
            Regex::Concat(a, b) => {
                let left = a.derivative(sym).map(|x| cat(x, (**b).clone()));
                let right = if a.nullable() { b.derivative(sym) } else { None };
                match (left, right) {
                    (Some(x), Some(y)) => Some(Regex::union(x, y)),
                    (x, y) => x.or(y),
                }
            }
            Regex::Plus(a) | Regex::Star(a) => a.derivative(sym).map(|x| cat(x, Regex::star((**a).clone()))),
        }
    }

    /// Single-symbol words of the language.
    pub fn single_letters(&self) -> BTreeSet<String> {
        self.alphabet().into_iter().filter(|s| self.derivative(s).is_some_and(|d| d.nullable())).collect()
    }

    /// A regex for the words of length at least two; `None` when there are none.
    pub fn long_part(&self) -> Option<Regex> {
        let parts = self.alphabet().into_iter().filter_map(|s| {
            let rest = self.derivative(&s)?.nonempty_part()?;
            Some(Regex::concat(Regex::sym(s), rest))
        });
        Regex::alt(parts.collect::<Vec<_>>())
    }

    /// Reference membership test by dynamic programming on the syntax tree.
    pub fn matches<S: AsRef<str>>(&self, word: &[S]) -> bool {
        let w: Vec<&str> = word.iter().map(|s| s.as_ref()).collect();
        let n = w.len();
        let table = self.span_table(&w);
        table[0][n]
    }

    /// `t[i][j]` holds iff `w[i..j]` is in the language.
    fn span_table(&self, w: &[&str]) -> Vec<Vec<bool>> {
        let n = w.len();
        let mut t = vec![vec![false; n + 1]; n + 1];
        match self {
            Regex::Eps => {
                for (i, row) in t.iter_mut().enumerate() {
                    row[i] = true;
                }
            }
            Regex::Sym(s) => {
                for i in 0..n {
                    t[i][i + 1] = w[i] == s;
                }
            }
            Regex::Union(a, b) => {
                let (ta, tb) = (a.span_table(w), b.span_table(w));
                for i in 0..=n {
                    for j in i..=n {
                        t[i][j] = ta[i][j] || tb[i][j];
                    }
                }
            }
            Regex::Concat(a, b) => {
                let (ta, tb) = (a.span_table(w), b.span_table(w));
                for i in 0..=n {
                    for j in i..=n {
                        t[i][j] = (i..=j).any(|k| ta[i][k] && tb[k][j]);
                    }
                }
            }
            Regex::Plus(a) | Regex::Star(a) => {
                let ta = a.span_table(w);
                for i in 0..=n {
                    t[i][i] = matches!(self, Regex::Star(_)) || ta[i][i];
                }
                // Closure over lengths: t[i][j] if ta[i][j] or t[i][k] && ta[k][j].
                for len in 1..=n {
                    for i in 0..=n - len {
                        let j = i + len;
                        t[i][j] = ta[i][j] || (i + 1..j).any(|k| t[i][k] && ta[k][j]);
                    }
                }
            }
        }
        t
    }
}

fn is_special(c: char) -> bool {
    matches!(c, '(' | ')' | '+' | '*' | '^' | '\'' | '[' | ']') || c.is_whitespace()
}

#[derive(Clone, Debug, PartialEq, Eq)]
enum Tok {
    Eps,
    Sym(String),
    LParen,
    RParen,
    Union,
    Star,
    Plus,
}

impl fmt::Display for Tok {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Tok::Eps => write!(f, "eps"),
            Tok::Sym(s) => write!(f, "{s}"),
            Tok::LParen => write!(f, "("),
            Tok::RParen => write!(f, ")"),
            Tok::Union => write!(f, "+"),
            Tok::Star => write!(f, "*"),
            Tok::Plus => write!(f, "^+"),
        }
    }
}

fn tokenize(text: &str) -> Result<Vec<(usize, Tok)>> {
    let chars: Vec<(usize, char)> = text.char_indices().collect();
    let mut out = Vec::new();
    let mut i = 0;
    let read_symbol = |i: &mut usize| -> Result<String> {
        let (pos, c) = chars[*i];
        if c == '\'' {
            let start = *i + 1;
            let mut j = start;
            while j < chars.len() && chars[j].1 != '\'' {
                j += 1;
            }
            if j >= chars.len() {
                return Err(Error::syntax(pos, "unterminated quoted symbol"));
            }
            let name: String = chars[start..j].iter().map(|(_, c)| *c).collect();
            if name.is_empty() {
                return Err(Error::syntax(pos, "empty quoted symbol"));
            }
            *i = j + 1;
            Ok(name)
        } else if is_special(c) {
            Err(Error::syntax(pos, format!("expected a symbol, found `{c}`")))
        } else {
            *i += 1;
            Ok(c.to_string())
        }
    };
    while i < chars.len() {
        let (pos, c) = chars[i];
        match c {
            c if c.is_whitespace() => i += 1,
            '(' => {
                out.push((pos, Tok::LParen));
                i += 1;
            }
            ')' => {
                out.push((pos, Tok::RParen));
                i += 1;
            }
            '+' => {
                out.push((pos, Tok::Union));
                i += 1;
            }
            '*' => {
                out.push((pos, Tok::Star));
                i += 1;
            }
            '^' => {
                if i + 1 >= chars.len() {
                    return Err(Error::syntax(pos, "dangling `^`"));
                }
                if chars[i + 1].1 == '+' {
                    out.push((pos, Tok::Plus));
                    i += 2;
                } else {
                    i += 1;
                    let base = read_symbol(&mut i)?;
                    out.push((pos, Tok::Sym(format!("^{base}"))));
                }
            }
            '[' | ']' => return Err(Error::syntax(pos, format!("unexpected `{c}`"))),
            _ => {
                if text[pos..].starts_with("eps") {
                    out.push((pos, Tok::Eps));
                    i += 3;
                } else {
                    let s = read_symbol(&mut i)?;
                    out.push((pos, Tok::Sym(s)));
                }
            }
        }
    }
    Ok(out)
}

struct Parser {
    tokens: Vec<(usize, Tok)>,
    pos: usize,
    len: usize,
}

impl Parser {
    fn peek(&self) -> Option<&Tok> {
        self.tokens.get(self.pos).map(|(_, t)| t)
    }

    fn here(&self) -> usize {
        self.tokens.get(self.pos).map(|(p, _)| *p).unwrap_or(self.len)
    }

    fn union(&mut self) -> Result<Regex> {
        let mut r = self.concat()?;
        while self.peek() == Some(&Tok::Union) {
            self.pos += 1;
            r = Regex::union(r, self.concat()?);
        }
        Ok(r)
    }

    fn concat(&mut self) -> Result<Regex> {
        let mut r: Option<Regex> = None;
        while matches!(self.peek(), Some(Tok::Eps | Tok::Sym(_) | Tok::LParen)) {
            let p = self.postfix()?;
            r = Some(match r {
                None => p,
                Some(l) => Regex::concat(l, p),
            });
        }
        r.ok_or_else(|| match self.peek() {
            Some(t) => Error::syntax(self.here(), format!("expected an expression before `{t}`")),
            None => Error::syntax(self.here(), "unexpected end of expression"),
        })
    }

    fn postfix(&mut self) -> Result<Regex> {
        let mut r = self.atom()?;
        loop {
            match self.peek() {
                Some(Tok::Star) => r = Regex::star(r),
                Some(Tok::Plus) => r = Regex::plus(r),
                _ => return Ok(r),
            }
            self.pos += 1;
        }
    }

    fn atom(&mut self) -> Result<Regex> {
        let here = self.here();
        let tok = self.peek().cloned();
        self.pos += 1;
        match tok {
            Some(Tok::Eps) => Ok(Regex::Eps),
            Some(Tok::Sym(s)) => Ok(Regex::Sym(s)),
            Some(Tok::LParen) => {
                let r = self.union()?;
                if self.peek() != Some(&Tok::RParen) {
                    return Err(Error::syntax(self.here(), "expected `)`"));
                }
                self.pos += 1;
                Ok(r)
            }
            _ => Err(Error::syntax(here, "expected an expression")),
        }
    }
}

/// Renders a symbol name in the token syntax.
pub fn render_symbol(name: &str) -> String {
    if let Some(base) = name.strip_prefix('^') {
        if !base.is_empty() {
            return format!("^{}", render_plain(base));
        }
    }
    render_plain(name)
}

fn render_plain(name: &str) -> String {
    let mut chars = name.chars();
    match (chars.next(), chars.next()) {
        (Some(c), None) if !is_special(c) => c.to_string(),
        _ => format!("'{name}'"),
    }
}

impl Regex {
    fn prec(&self) -> u8 {
        match self {
            Regex::Union(..) => 0,
            Regex::Concat(..) => 1,
            _ => 2,
        }
    }

    fn fmt_prec(&self, f: &mut fmt::Formatter<'_>, min: u8) -> fmt::Result {
        let paren = self.prec() < min;
        if paren {
            write!(f, "(")?;
        }
        match self {
            Regex::Eps => write!(f, "eps")?,
            Regex::Sym(s) => write!(f, "{}", render_symbol(s))?,
            Regex::Union(a, b) => {
                a.fmt_prec(f, 0)?;
                write!(f, " + ")?;
                b.fmt_prec(f, 1)?;
            }
            Regex::Concat(a, b) => {
                a.fmt_prec(f, 1)?;
                write!(f, " ")?;
                b.fmt_prec(f, 2)?;
            }
            Regex::Star(a) => {
                a.fmt_prec(f, 3)?;
                write!(f, "*")?;
            }
            Regex::Plus(a) => {
                a.fmt_prec(f, 3)?;
                write!(f, "^+")?;
            }
        }
        if paren {
            write!(f, ")")?;
        }
        Ok(())
    }
}

impl fmt::Display for Regex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.fmt_prec(f, 0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(s: &str) -> Regex {
        Regex::parse(s).unwrap()
    }

    #[test]
    fn parses_star_of_concat() {
        assert_eq!(p("(ab)*"), Regex::star(Regex::concat(Regex::sym("a"), Regex::sym("b"))));
    }

    #[test]
    fn plus_is_union() {
        assert_eq!(p("a+b"), Regex::union(Regex::sym("a"), Regex::sym("b")));
        assert_eq!(p("a^+"), Regex::plus(Regex::sym("a")));
    }

    #[test]
    fn empty_text_is_error() {
        assert!(matches!(Regex::parse(""), Err(Error::Syntax { pos: 0, .. })));
        assert!(matches!(Regex::parse("   "), Err(Error::Syntax { .. })));
    }

    #[test]
    fn precedence() {
        assert_eq!(
            p("ab*+c"),
            Regex::union(Regex::concat(Regex::sym("a"), Regex::star(Regex::sym("b"))), Regex::sym("c"))
        );
    }

    #[test]
    fn quoted_and_hatted_symbols() {
        assert_eq!(p("'box' ^a ^'hash'"), Regex::word(&["box", "^a", "^hash"]));
        assert_eq!(p("eps"), Regex::Eps);
    }

    #[test]
    fn syntax_errors_carry_positions() {
        assert!(matches!(Regex::parse("a+"), Err(Error::Syntax { pos: 2, .. })));
        assert!(matches!(Regex::parse("(a"), Err(Error::Syntax { pos: 2, .. })));
        assert!(matches!(Regex::parse("a)"), Err(Error::Syntax { pos: 1, .. })));
        assert!(matches!(Regex::parse("'ab"), Err(Error::Syntax { pos: 0, .. })));
        assert!(matches!(Regex::parse("*"), Err(Error::Syntax { pos: 0, .. })));
    }

    #[test]
    fn display_round_trips() {
        for s in ["(ab)*", "a+b c", "(a+b)^+ c*", "eps + 'box' ^x", "((a+b)+c)(d+e)", "e p s"] {
            let r = p(s);
            assert_eq!(p(&r.to_string()), r, "{s} -> {r}");
        }
    }

    #[test]
    fn reference_matcher() {
        let r = p("(ab)*");
        assert!(r.matches(&["a", "b", "a", "b"]));
        assert!(!r.matches(&["a", "b", "a"]));
        assert!(r.matches::<&str>(&[]));
        assert!(!p("(ab)^+").matches::<&str>(&[]));
        assert!(p("(eps+a)^+").matches::<&str>(&[]));
    }

    #[test]
    fn nonempty_part_removes_only_epsilon() {
        assert_eq!(p("eps").nonempty_part(), None);
        let r = p("(eps+a)(b*)").nonempty_part().unwrap();
        assert!(!r.nullable());
        for w in [&["a"][..], &["b"], &["a", "b", "b"], &["b", "b"]] {
            assert!(r.matches(w));
        }
        assert!(!r.matches(&["b", "a"]));
    }

    #[test]
    fn classification_helpers() {
        assert!(p("ab+ba").is_star_free());
        assert!(!p("(ab)*").is_star_free());
        assert_eq!(p("(ab)* c").alphabet().len(), 3);
    }

    fn words_up_to(alphabet: &[&str], n: usize) -> Vec<Vec<String>> {
        let mut out = vec![Vec::new()];
        let mut layer: Vec<Vec<String>> = vec![Vec::new()];
        for _ in 0..n {
            layer = layer
                .iter()
                .flat_map(|w| alphabet.iter().map(move |a| [w.clone(), vec![a.to_string()]].concat()))
                .collect();
            out.extend(layer.iter().cloned());
        }
        out
    }

    #[test]
    fn derivatives_agree_with_the_matcher() {
        for s in ["(ab)*", "a+b c", "(a+b)^+ c*", "eps + a", "(eps+a)(b*)a", "a^+ b^+"] {
            let r = p(s);
            for w in words_up_to(&["a", "b", "c"], 4) {
                for x in ["a", "b", "c"] {
                    let tail = [vec![x.to_string()], w.clone()].concat();
                    let d = r.derivative(x).is_some_and(|d| d.matches(&w));
                    assert_eq!(d, r.matches(&tail), "{s} d{x} on {w:?}");
                }
                let long = r.long_part().is_some_and(|l| l.matches(&w));
                assert_eq!(long, w.len() >= 2 && r.matches(&w), "{s} long on {w:?}");
            }
            let singles: BTreeSet<String> =
                ["a", "b", "c"].iter().filter(|x| r.matches(&[**x])).map(|x| x.to_string()).collect();
            assert_eq!(r.single_letters(), singles, "{s}");
        }
        assert_eq!(p("a").long_part(), None);
    }
}
