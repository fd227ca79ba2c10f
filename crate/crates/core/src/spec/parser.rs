//! Recursive-descent parser for the textual specification format.
//!
//! ```text
//! formula := term ('||' term)*
//! term    := factor ('&&' factor)*
//! factor  := ('G' | 'F') interval factor
//!          | '(' formula 'U' interval formula ')'
//!          | '(' formula ')'
//!          | atom
//! atom    := 'true' | affine cmp affine | ('sd_out' | 'sd_in') '(' region ['@' vars] ')' cmp 0
//! ```
//!
//! Intervals are `[a,b]`, `[a;b]`, `[a,inf]`, `{c}`, `>=c`, optionally
//! wrapped as `_{...}`. Strict comparisons are read as their closures, and
//! `<`/`<=` are normalized into `>= 0` form.

use super::formula::{Formula, Interval, Orientation, PredicateFunction};
use super::geometry::{Halfspace, Region};
use super::SpecError;

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64, bool),
    Ident(String),
    LParen,
    RParen,
    LBracket,
    RBracket,
    LBrace,
    RBrace,
    Comma,
    Semi,
    At,
    Plus,
    Minus,
    Star,
    Ge,
    Le,
    AndAnd,
    OrOr,
    Bang,
    Eof,
}

#[derive(Debug, Clone, Copy)]
struct Pos {
    line: usize,
    col: usize,
}

fn lex(text: &str) -> Result<Vec<(Tok, Pos)>, SpecError> {
    let chars: Vec<char> = text.chars().collect();
    let mut out = Vec::new();
    let (mut i, mut line, mut col) = (0usize, 1usize, 1usize);
    macro_rules! bump {
        () => {{
            if chars[i] == '\n' {
                line += 1;
                col = 1;
            } else {
                col += 1;
            }
            i += 1;
        }};
    }
    while i < chars.len() {
        let c = chars[i];
        let pos = Pos { line, col };
        if c.is_whitespace() {
            bump!();
            continue;
        }
        if c == '#' {
            while i < chars.len() && chars[i] != '\n' {
                bump!();
            }
            continue;
        }
        let next = chars.get(i + 1).copied();
        let single = match c {
            '(' => Some(Tok::LParen),
            ')' => Some(Tok::RParen),
            '[' => Some(Tok::LBracket),
            ']' => Some(Tok::RBracket),
            '{' => Some(Tok::LBrace),
            '}' => Some(Tok::RBrace),
            ',' => Some(Tok::Comma),
            ';' => Some(Tok::Semi),
            '@' => Some(Tok::At),
            '+' => Some(Tok::Plus),
            '-' => Some(Tok::Minus),
            '*' => Some(Tok::Star),
            '≥' => Some(Tok::Ge),
            '≤' => Some(Tok::Le),
            '∧' => Some(Tok::AndAnd),
            '∨' => Some(Tok::OrOr),
            '¬' => Some(Tok::Bang),
            '∞' => Some(Tok::Ident("inf".into())),
            _ => None,
        };
        if let Some(t) = single {
            out.push((t, pos));
            bump!();
            continue;
        }
        match (c, next) {
            ('>', Some('=')) | ('<', Some('=')) | ('&', Some('&')) | ('|', Some('|')) => {
                let t = match c {
                    '>' => Tok::Ge,
                    '<' => Tok::Le,
                    '&' => Tok::AndAnd,
                    _ => Tok::OrOr,
                };
                out.push((t, pos));
                bump!();
                bump!();
                continue;
            }
            ('>', _) => {
                out.push((Tok::Ge, pos));
                bump!();
                continue;
            }
            ('<', _) => {
                out.push((Tok::Le, pos));
                bump!();
                continue;
            }
            ('!', _) => {
                out.push((Tok::Bang, pos));
                bump!();
                continue;
            }
            _ => {}
        }
        if c.is_ascii_digit() || (c == '.' && next.is_some_and(|d| d.is_ascii_digit())) {
            let start = i;
            let mut integral = true;
            while i < chars.len() && chars[i].is_ascii_digit() {
                bump!();
            }
            if i < chars.len() && chars[i] == '.' {
                integral = false;
                bump!();
                while i < chars.len() && chars[i].is_ascii_digit() {
                    bump!();
                }
            }
            if i < chars.len() && (chars[i] == 'e' || chars[i] == 'E') {
                let save = (i, line, col);
                bump!();
                if i < chars.len() && (chars[i] == '+' || chars[i] == '-') {
                    bump!();
                }
                if i < chars.len() && chars[i].is_ascii_digit() {
                    integral = false;
                    while i < chars.len() && chars[i].is_ascii_digit() {
                        bump!();
                    }
                } else {
                    (i, line, col) = save;
                }
            }
            let s: String = chars[start..i].iter().collect();
            let v: f64 = s.parse().map_err(|_| SpecError::Syntax {
                line: pos.line,
                col: pos.col,
                msg: format!("bad number `{s}`"),
            })?;
            out.push((Tok::Num(v, integral), pos));
            continue;
        }
        if c.is_alphabetic() || c == '_' {
            let start = i;
            while i < chars.len() && (chars[i].is_alphanumeric() || chars[i] == '_') {
                bump!();
            }
            let s: String = chars[start..i].iter().collect();
            out.push((Tok::Ident(s), pos));
            continue;
        }
        return Err(SpecError::Syntax {
            line: pos.line,
            col: pos.col,
            msg: format!("unexpected character `{c}`"),
        });
    }
    out.push((Tok::Eof, Pos { line, col }));
    Ok(out)
}

struct Parser {
    toks: Vec<(Tok, Pos)>,
    at: usize,
    n: usize,
}

/// Parses a specification over an `n`-dimensional signal.
pub fn parse_spec(text: &str, n: usize) -> Result<Formula, SpecError> {
    let toks = lex(text)?;
    // Negation is rejected wherever it appears, before any other diagnostics.
    if let Some((_, p)) = toks.iter().find(|(t, _)| *t == Tok::Bang) {
        return Err(SpecError::NegationRejected {
            line: p.line,
            col: p.col,
        });
    }
    let mut p = Parser { toks, at: 0, n };
    let f = p.formula()?;
    p.expect(&Tok::Eof, "end of input")?;
    Ok(f)
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.at].0
    }

    fn pos(&self) -> Pos {
        self.toks[self.at].1
    }

    fn advance(&mut self) -> Tok {
        let t = self.toks[self.at].0.clone();
        if self.at + 1 < self.toks.len() {
            self.at += 1;
        }
        t
    }

    fn err<T>(&self, msg: impl Into<String>) -> Result<T, SpecError> {
        let p = self.pos();
        Err(SpecError::Syntax {
            line: p.line,
            col: p.col,
            msg: msg.into(),
        })
    }

    fn dim_err<T>(&self, pos: Pos, msg: impl Into<String>) -> Result<T, SpecError> {
        Err(SpecError::Dimension {
            line: pos.line,
            col: pos.col,
            msg: msg.into(),
        })
    }

    fn expect(&mut self, t: &Tok, what: &str) -> Result<(), SpecError> {
        if self.peek() == t {
            self.advance();
            Ok(())
        } else {
            self.err(format!("expected {what}, found {}", describe(self.peek())))
        }
    }

    fn eat(&mut self, t: &Tok) -> bool {
        if self.peek() == t {
            self.advance();
            true
        } else {
            false
        }
    }

    fn is_ident(&self, name: &str) -> bool {
        matches!(self.peek(), Tok::Ident(s) if s == name)
    }

    fn formula(&mut self) -> Result<Formula, SpecError> {
        let mut terms = vec![self.term()?];
        while self.eat(&Tok::OrOr) {
            terms.push(self.term()?);
        }
        Ok(if terms.len() == 1 {
            terms.pop().unwrap()
        } else {
            Formula::Or(terms)
        })
    }

    fn term(&mut self) -> Result<Formula, SpecError> {
        let mut factors = vec![self.factor()?];
        while self.eat(&Tok::AndAnd) {
            factors.push(self.factor()?);
        }
        Ok(if factors.len() == 1 {
            factors.pop().unwrap()
        } else {
            Formula::And(factors)
        })
    }

    fn factor(&mut self) -> Result<Formula, SpecError> {
        match self.peek().clone() {
            Tok::LParen => {
                self.advance();
                let inner = self.formula()?;
                if self.is_ident("U") || self.is_ident("U_") {
                    let iv_pos = self.pos();
                    self.advance();
                    let iv = self.interval()?;
                    if !iv.is_bounded() {
                        return Err(SpecError::Syntax {
                            line: iv_pos.line,
                            col: iv_pos.col,
                            msg: "until requires a bounded interval".into(),
                        });
                    }
                    let right = self.formula()?;
                    self.expect(&Tok::RParen, "`)` closing until")?;
                    Ok(Formula::Until(iv, Box::new(inner), Box::new(right)))
                } else {
                    self.expect(&Tok::RParen, "`)` or `U`")?;
                    Ok(inner)
                }
            }
            Tok::Ident(s) if matches!(s.as_str(), "G" | "G_" | "F" | "F_") => {
                self.advance();
                let iv = self.interval()?;
                let child = self.factor()?;
                Ok(if s.starts_with('G') {
                    Formula::Always(iv, Box::new(child))
                } else {
                    Formula::Eventually(iv, Box::new(child))
                })
            }
            Tok::Ident(s) if s == "true" => {
                self.advance();
                Ok(Formula::True)
            }
            Tok::Ident(s) if s == "sd_out" || s == "sd_in" => self.sd_atom(),
            Tok::Ident(s) if s == "lipschitz" => {
                self.err("lipschitz predicates can only be constructed programmatically")
            }
            _ => self.affine_atom(),
        }
    }

    fn uint(&mut self) -> Result<u64, SpecError> {
        match self.peek().clone() {
            Tok::Num(v, true) if (0.0..=9.0e15).contains(&v) => {
                self.advance();
                Ok(v as u64)
            }
            other => self.err(format!(
                "expected a non-negative integer time bound, found {}",
                describe(&other)
            )),
        }
    }

    fn interval(&mut self) -> Result<Interval, SpecError> {
        let pos = self.pos();
        let wrap = |r: Result<Interval, SpecError>| {
            r.map_err(|e| match e {
                SpecError::InvalidInterval { a, b } => SpecError::Syntax {
                    line: pos.line,
                    col: pos.col,
                    msg: format!("interval [{a},{b}] has a > b"),
                },
                other => other,
            })
        };
        match self.peek().clone() {
            Tok::LBracket => {
                self.advance();
                let a = self.uint()?;
                if !self.eat(&Tok::Comma) && !self.eat(&Tok::Semi) {
                    return self.err("expected `,` or `;` in interval");
                }
                let iv = if self.is_ident("inf") {
                    self.advance();
                    Interval::unbounded(a)
                } else {
                    let b = self.uint()?;
                    wrap(Interval::new(a, b))?
                };
                self.expect(&Tok::RBracket, "`]`")?;
                Ok(iv)
            }
            Tok::LBrace => {
                self.advance();
                if let Tok::Num(_, true) = self.peek() {
                    let c = self.uint()?;
                    self.expect(&Tok::RBrace, "`}`")?;
                    return Ok(Interval::singleton(c));
                }
                let iv = self.interval()?;
                self.expect(&Tok::RBrace, "`}`")?;
                Ok(iv)
            }
            Tok::Ge => {
                self.advance();
                Ok(Interval::unbounded(self.uint()?))
            }
            other => self.err(format!(
                "expected a time interval, found {}",
                describe(&other)
            )),
        }
    }

    fn number(&mut self) -> Result<f64, SpecError> {
        let neg = if self.eat(&Tok::Minus) {
            true
        } else {
            self.eat(&Tok::Plus);
            false
        };
        match self.peek().clone() {
            Tok::Num(v, _) => {
                self.advance();
                Ok(if neg { -v } else { v })
            }
            other => self.err(format!("expected a number, found {}", describe(&other))),
        }
    }

    fn vector(&mut self) -> Result<Vec<f64>, SpecError> {
        self.expect(&Tok::LBracket, "`[`")?;
        let mut v = vec![self.number()?];
        while self.eat(&Tok::Comma) {
            v.push(self.number()?);
        }
        self.expect(&Tok::RBracket, "`]`")?;
        Ok(v)
    }

    fn variable(&mut self) -> Result<Option<usize>, SpecError> {
        let pos = self.pos();
        if let Tok::Ident(s) = self.peek().clone() {
            if let Some(idx) = s.strip_prefix('x').and_then(|d| d.parse::<usize>().ok()) {
                self.advance();
                if idx == 0 || idx > self.n {
                    return self.dim_err(
                        pos,
                        format!(
                            "variable x{idx} is out of range for a {}-dimensional signal",
                            self.n
                        ),
                    );
                }
                return Ok(Some(idx - 1));
            }
        }
        Ok(None)
    }

    /// Affine expression as (coefficients, constant).
    fn affine(&mut self) -> Result<(Vec<f64>, f64), SpecError> {
        let mut coeffs = vec![0.0; self.n];
        let mut constant = 0.0;
        let mut first = true;
        loop {
            let sign = if self.eat(&Tok::Minus) {
                -1.0
            } else if self.eat(&Tok::Plus) || first {
                1.0
            } else {
                break;
            };
            first = false;
            if let Some(i) = self.variable()? {
                coeffs[i] += sign;
                continue;
            }
            match self.peek().clone() {
                Tok::Num(v, _) => {
                    self.advance();
                    self.eat(&Tok::Star);
                    if let Some(i) = self.variable()? {
                        coeffs[i] += sign * v;
                    } else {
                        constant += sign * v;
                    }
                }
                other => {
                    return self.err(format!(
                        "expected a number or variable, found {}",
                        describe(&other)
                    ))
                }
            }
        }
        Ok((coeffs, constant))
    }

    /// Returns true for `>`/`>=`, false for `<`/`<=`.
    fn comparison(&mut self) -> Result<bool, SpecError> {
        match self.peek() {
            Tok::Ge => {
                self.advance();
                Ok(true)
            }
            Tok::Le => {
                self.advance();
                Ok(false)
            }
            other => self.err(format!("expected a comparison, found {}", describe(other))),
        }
    }

    fn affine_atom(&mut self) -> Result<Formula, SpecError> {
        let start = self.pos();
        if !matches!(
            self.peek(),
            Tok::Num(..) | Tok::Ident(_) | Tok::Minus | Tok::Plus
        ) {
            return self.err(format!(
                "expected a formula, found {}",
                describe(self.peek())
            ));
        }
        let (lhs, lc) = self.affine()?;
        let greater = self.comparison()?;
        let (rhs, rc) = self.affine()?;
        let sign = if greater { 1.0 } else { -1.0 };
        let coeffs: Vec<f64> = lhs.iter().zip(&rhs).map(|(l, r)| sign * (l - r)).collect();
        let offset = sign * (lc - rc);
        PredicateFunction::linear(coeffs, offset)
            .map(Formula::Predicate)
            .map_err(|e| SpecError::Syntax {
                line: start.line,
                col: start.col,
                msg: e.to_string(),
            })
    }

    fn sd_atom(&mut self) -> Result<Formula, SpecError> {
        let start = self.pos();
        let Tok::Ident(name) = self.advance() else {
            unreachable!()
        };
        self.expect(&Tok::LParen, "`(`")?;
        let region_pos = self.pos();
        let region = self.region()?;
        let dims = if self.eat(&Tok::At) {
            let mut dims = Vec::new();
            loop {
                let pos = self.pos();
                match self.variable()? {
                    Some(i) => dims.push(i),
                    None => return self.err("expected a variable such as x1"),
                }
                let _ = pos;
                if !self.eat(&Tok::Comma) {
                    break;
                }
            }
            dims
        } else {
            (0..region.dim()).collect()
        };
        self.expect(&Tok::RParen, "`)`")?;
        if dims.len() != region.dim() {
            return self.dim_err(
                region_pos,
                format!(
                    "region has {} dimensions but {} variables were selected",
                    region.dim(),
                    dims.len()
                ),
            );
        }
        if let Some(&d) = dims.iter().max() {
            if d >= self.n {
                return self.dim_err(
                    region_pos,
                    format!("region needs {} dimensions, signal has {}", d + 1, self.n),
                );
            }
        }
        let greater = self.comparison()?;
        let zero_pos = self.pos();
        let rhs = self.number()?;
        if rhs != 0.0 {
            return Err(SpecError::Syntax {
                line: zero_pos.line,
                col: zero_pos.col,
                msg: "signed-distance atoms must be compared against 0".into(),
            });
        }
        let outside = name == "sd_out";
        let orientation = if outside == greater {
            Orientation::Avoid
        } else {
            Orientation::Reach
        };
        PredicateFunction::signed_distance(region, dims, orientation)
            .map(Formula::Predicate)
            .map_err(|e| SpecError::Syntax {
                line: start.line,
                col: start.col,
                msg: e.to_string(),
            })
    }

    fn region(&mut self) -> Result<Region, SpecError> {
        let pos = self.pos();
        let name = match self.advance() {
            Tok::Ident(s) => s,
            other => {
                return Err(SpecError::Syntax {
                    line: pos.line,
                    col: pos.col,
                    msg: format!("expected a region, found {}", describe(&other)),
                })
            }
        };
        self.expect(&Tok::LParen, "`(`")?;
        let region = match name.as_str() {
            "box" => {
                let (mut lo, mut hi) = (vec![], vec![]);
                loop {
                    let v = self.vector()?;
                    if v.len() != 2 {
                        return self.err("box bounds are written [lo,hi]");
                    }
                    lo.push(v[0]);
                    hi.push(v[1]);
                    if !self.eat(&Tok::Comma) {
                        break;
                    }
                }
                Region::Box { lo, hi }
            }
            "ball" => {
                let center = self.vector()?;
                self.expect(&Tok::Semi, "`;`")?;
                let radius = self.number()?;
                Region::Ball { center, radius }
            }
            "halfspace" => Region::Halfspace(self.halfspace_body()?),
            "poly" => {
                let mut hs = Vec::new();
                loop {
                    if !self.is_ident("halfspace") {
                        return self.err("poly(...) takes a list of halfspace(...)");
                    }
                    self.advance();
                    self.expect(&Tok::LParen, "`(`")?;
                    hs.push(self.halfspace_body()?);
                    self.expect(&Tok::RParen, "`)`")?;
                    if !self.eat(&Tok::Comma) {
                        break;
                    }
                }
                Region::ConvexPolytope(hs)
            }
            "union" => {
                let mut members = vec![self.region()?];
                while self.eat(&Tok::Comma) {
                    members.push(self.region()?);
                }
                Region::UnionOfConvex(members)
            }
            other => {
                return Err(SpecError::Syntax {
                    line: pos.line,
                    col: pos.col,
                    msg: format!("unknown region `{other}`"),
                })
            }
        };
        self.expect(&Tok::RParen, "`)`")?;
        if let Err(msg) = region.validate() {
            return Err(SpecError::Syntax {
                line: pos.line,
                col: pos.col,
                msg,
            });
        }
        Ok(region)
    }

    fn halfspace_body(&mut self) -> Result<Halfspace, SpecError> {
        let normal = self.vector()?;
        self.expect(&Tok::Semi, "`;`")?;
        let offset = self.number()?;
        Ok(Halfspace { normal, offset })
    }
}

fn describe(t: &Tok) -> String {
    match t {
        Tok::Num(v, _) => format!("number `{v}`"),
        Tok::Ident(s) => format!("`{s}`"),
        Tok::Eof => "end of input".into(),
        Tok::LParen => "`(`".into(),
        Tok::RParen => "`)`".into(),
        Tok::LBracket => "`[`".into(),
        Tok::RBracket => "`]`".into(),
        Tok::LBrace => "`{`".into(),
        Tok::RBrace => "`}`".into(),
        Tok::Comma => "`,`".into(),
        Tok::Semi => "`;`".into(),
        Tok::At => "`@`".into(),
        Tok::Plus => "`+`".into(),
        Tok::Minus => "`-`".into(),
        Tok::Star => "`*`".into(),
        Tok::Ge => "`>=`".into(),
        Tok::Le => "`<=`".into(),
        Tok::AndAnd => "`&&`".into(),
        Tok::OrOr => "`||`".into(),
        Tok::Bang => "`!`".into(),
    }
}
