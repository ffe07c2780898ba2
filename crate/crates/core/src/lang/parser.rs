//! Recursive-descent parser used as the compile check for generated
//! programs. It accepts the subset of Python the generator emits and
//! mirrors the compile-time errors CPython raises for it: malformed
//! syntax, bad indentation, invalid assignment targets, and `return`,
//! `break` or `continue` in the wrong context.

use serde::{Deserialize, Serialize};

use super::lexer::{tokenize, Token, TokenKind};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CompileError {
    pub line: usize,
    pub col: usize,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CompileVerdict {
    pub ok: bool,
    pub error: Option<CompileError>,
}

impl CompileVerdict {
    fn success() -> Self {
        Self { ok: true, error: None }
    }

    fn failure(line: usize, col: usize, message: impl Into<String>) -> Self {
        Self { ok: false, error: Some(CompileError { line, col, message: message.into() }) }
    }
}

/// Parses `source` with the restricted grammar and reports the first violation.
pub fn validate(source: &str) -> CompileVerdict {
    let tokens = match tokenize(source) {
        Ok(t) => t,
        Err(e) => return CompileVerdict::failure(e.line, e.col, e.message),
    };
    let mut parser = Parser { tokens: &tokens, pos: 0, func_depth: 0, loop_depth: 0 };
    match parser.file() {
        Ok(()) => CompileVerdict::success(),
        Err(e) => CompileVerdict { ok: false, error: Some(e) },
    }
}

type PResult<T> = Result<T, CompileError>;

/// What an expression can be assigned to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum ExprShape {
    Name,
    Subscript,
    Attribute,
    Tuple { assignable: bool },
    Other,
}

impl ExprShape {
    fn assignable(self) -> bool {
        matches!(self, Self::Name | Self::Subscript | Self::Attribute | Self::Tuple { assignable: true })
    }

    fn aug_assignable(self) -> bool {
        matches!(self, Self::Name | Self::Subscript | Self::Attribute)
    }
}

struct Parser<'a> {
    tokens: &'a [Token],
    pos: usize,
    func_depth: usize,
    loop_depth: usize,
}

const COMPARE_OPS: &[&str] = &["==", "!=", "<", ">", "<=", ">="];
const AUG_OPS: &[&str] = &["+=", "-=", "*=", "/=", "//=", "%=", "**=", "&=", "|=", "^=", ">>=", "<<="];

impl<'a> Parser<'a> {
    fn peek(&self) -> Option<&'a Token> {
        self.tokens.get(self.pos)
    }

    fn peek_at(&self, offset: usize) -> Option<&'a Token> {
        self.tokens.get(self.pos + offset)
    }

    fn error_here(&self, message: impl Into<String>) -> CompileError {
        let (line, col) = match self.peek() {
            Some(t) => (t.line, t.col),
            None => self.tokens.last().map_or((1, 1), |t| (t.line + 1, 1)),
        };
        CompileError { line, col, message: message.into() }
    }

    fn at_op(&self, text: &str) -> bool {
        self.peek().is_some_and(|t| t.is_op(text))
    }

    fn at_keyword(&self, text: &str) -> bool {
        self.peek().is_some_and(|t| t.is_keyword(text))
    }

    fn at_kind(&self, kind: TokenKind) -> bool {
        self.peek().is_some_and(|t| t.kind == kind)
    }

    fn eat_op(&mut self, text: &str) -> bool {
        if self.at_op(text) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn eat_keyword(&mut self, text: &str) -> bool {
        if self.at_keyword(text) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expect_op(&mut self, text: &str) -> PResult<()> {
        if self.eat_op(text) {
            Ok(())
        } else {
            Err(self.error_here(format!("expected '{text}'")))
        }
    }

    fn expect_name(&mut self) -> PResult<&'a Token> {
        match self.peek() {
            Some(t) if t.kind == TokenKind::Identifier => {
                self.pos += 1;
                Ok(t)
            }
            _ => Err(self.error_here("expected identifier")),
        }
    }

    fn expect_newline(&mut self) -> PResult<()> {
        if self.at_kind(TokenKind::Newline) {
            self.pos += 1;
            Ok(())
        } else {
            Err(self.error_here("invalid syntax"))
        }
    }

    fn file(&mut self) -> PResult<()> {
        while let Some(tok) = self.peek() {
            match tok.kind {
                TokenKind::Newline => {
                    self.pos += 1;
                }
                TokenKind::Indent => return Err(self.error_here("unexpected indent")),
                TokenKind::Dedent => return Err(self.error_here("unexpected dedent")),
                _ => self.statement()?,
            }
        }
        Ok(())
    }

    fn statement(&mut self) -> PResult<()> {
        let tok = self.peek().ok_or_else(|| self.error_here("unexpected end of input"))?;
        if tok.kind == TokenKind::Keyword {
            match tok.text.as_str() {
                "def" => return self.def_stmt(),
                "if" => return self.if_stmt(),
                "for" => return self.for_stmt(),
                "while" => return self.while_stmt(),
                _ => {}
            }
        }
        self.simple_line()
    }

    fn simple_line(&mut self) -> PResult<()> {
        self.simple_stmt()?;
        while self.eat_op(";") {
            if self.at_kind(TokenKind::Newline) {
                break;
            }
            self.simple_stmt()?;
        }
        self.expect_newline()
    }

    fn suite(&mut self) -> PResult<()> {
        if !self.at_kind(TokenKind::Newline) {
            if let Some(t) = self.peek() {
                if t.kind == TokenKind::Keyword && matches!(t.text.as_str(), "def" | "if" | "for" | "while") {
                    return Err(self.error_here("invalid syntax"));
                }
            }
            return self.simple_line();
        }
        self.pos += 1;
        if !self.at_kind(TokenKind::Indent) {
            return Err(self.error_here("expected an indented block"));
        }
        self.pos += 1;
        loop {
            match self.peek() {
                None => return Ok(()),
                Some(t) if t.kind == TokenKind::Dedent => {
                    self.pos += 1;
                    return Ok(());
                }
                Some(t) if t.kind == TokenKind::Indent => return Err(self.error_here("unexpected indent")),
                Some(t) if t.kind == TokenKind::Newline => {
                    self.pos += 1;
                }
                Some(_) => self.statement()?,
            }
        }
    }

    fn def_stmt(&mut self) -> PResult<()> {
        self.pos += 1;
        self.expect_name()?;
        self.expect_op("(")?;
        let mut seen: Vec<&str> = Vec::new();
        let mut had_default = false;
        if !self.at_op(")") {
            loop {
                let name = self.expect_name()?;
                if seen.contains(&name.text.as_str()) {
                    return Err(CompileError {
                        line: name.line,
                        col: name.col,
                        message: format!("duplicate argument '{}' in function definition", name.text),
                    });
                }
                seen.push(&name.text);
                if self.eat_op("=") {
                    self.test()?;
                    had_default = true;
                } else if had_default {
                    return Err(self.error_here("non-default argument follows default argument"));
                }
                if !self.eat_op(",") || self.at_op(")") {
                    break;
                }
            }
        }
        self.expect_op(")")?;
        if self.eat_op("->") {
            self.test()?;
        }
        self.expect_op(":")?;
        let saved_loop = std::mem::replace(&mut self.loop_depth, 0);
        self.func_depth += 1;
        let r = self.suite();
        self.func_depth -= 1;
        self.loop_depth = saved_loop;
        r
    }

    fn if_stmt(&mut self) -> PResult<()> {
        self.pos += 1;
        self.test()?;
        self.expect_op(":")?;
        self.suite()?;
        while self.eat_keyword("elif") {
            self.test()?;
            self.expect_op(":")?;
            self.suite()?;
        }
        if self.eat_keyword("else") {
            self.expect_op(":")?;
            self.suite()?;
        }
        Ok(())
    }

    fn for_stmt(&mut self) -> PResult<()> {
        self.pos += 1;
        let target_at = self.peek().cloned();
        let shape = self.target_list()?;
        if !shape.assignable() {
            let t = target_at.unwrap();
            return Err(CompileError { line: t.line, col: t.col, message: "cannot assign to expression".into() });
        }
        if !self.eat_keyword("in") {
            return Err(self.error_here("expected 'in'"));
        }
        self.test_list()?;
        self.expect_op(":")?;
        self.loop_body()?;
        if self.eat_keyword("else") {
            self.expect_op(":")?;
            self.suite()?;
        }
        Ok(())
    }

    fn while_stmt(&mut self) -> PResult<()> {
        self.pos += 1;
        self.test()?;
        self.expect_op(":")?;
        self.loop_body()?;
        if self.eat_keyword("else") {
            self.expect_op(":")?;
            self.suite()?;
        }
        Ok(())
    }

    fn loop_body(&mut self) -> PResult<()> {
        self.loop_depth += 1;
        let r = self.suite();
        self.loop_depth -= 1;
        r
    }

    fn target_list(&mut self) -> PResult<ExprShape> {
        let first = self.or_expr()?;
        if !self.at_op(",") {
            return Ok(first);
        }
        let mut assignable = first.assignable();
        while self.eat_op(",") {
            if self.at_keyword("in") {
                break;
            }
            assignable &= self.or_expr()?.assignable();
        }
        Ok(ExprShape::Tuple { assignable })
    }

    fn simple_stmt(&mut self) -> PResult<()> {
        let tok = self.peek().ok_or_else(|| self.error_here("unexpected end of input"))?;
        if tok.kind == TokenKind::Keyword {
            match tok.text.as_str() {
                "import" => {
                    self.pos += 1;
                    loop {
                        self.dotted_name()?;
                        if self.eat_keyword("as") {
                            self.expect_name()?;
                        }
                        if !self.eat_op(",") {
                            break;
                        }
                    }
                    return Ok(());
                }
                "from" => {
                    self.pos += 1;
                    self.dotted_name()?;
                    if !self.eat_keyword("import") {
                        return Err(self.error_here("expected 'import'"));
                    }
                    if self.eat_op("*") {
                        return Ok(());
                    }
                    loop {
                        self.expect_name()?;
                        if self.eat_keyword("as") {
                            self.expect_name()?;
                        }
                        if !self.eat_op(",") {
                            break;
                        }
                    }
                    return Ok(());
                }
                "return" => {
                    if self.func_depth == 0 {
                        return Err(self.error_here("'return' outside function"));
                    }
                    self.pos += 1;
                    if !self.at_kind(TokenKind::Newline) && !self.at_op(";") {
                        self.test_list()?;
                    }
                    return Ok(());
                }
                "pass" => {
                    self.pos += 1;
                    return Ok(());
                }
                "break" | "continue" => {
                    if self.loop_depth == 0 {
                        return Err(self.error_here(format!("'{}' outside loop", tok.text)));
                    }
                    self.pos += 1;
                    return Ok(());
                }
                "def" | "if" | "for" | "while" | "elif" | "else" | "in" | "as" => {
                    return Err(self.error_here("invalid syntax"));
                }
                _ => {}
            }
        }
        self.expr_stmt()
    }

    fn dotted_name(&mut self) -> PResult<()> {
        self.expect_name()?;
        while self.eat_op(".") {
            self.expect_name()?;
        }
        Ok(())
    }

    fn expr_stmt(&mut self) -> PResult<()> {
        let start = self.peek().cloned();
        let mut shape = self.test_list()?;
        if let Some(op) = self.peek().filter(|t| t.kind == TokenKind::Operator && AUG_OPS.contains(&t.text.as_str())) {
            if !shape.aug_assignable() {
                return Err(CompileError {
                    line: op.line,
                    col: op.col,
                    message: "illegal expression for augmented assignment".into(),
                });
            }
            self.pos += 1;
            self.test_list()?;
            return Ok(());
        }
        let mut target_tok = start;
        while self.at_op("=") {
            if !shape.assignable() {
                let t = target_tok.unwrap();
                return Err(CompileError { line: t.line, col: t.col, message: "cannot assign to expression".into() });
            }
            self.pos += 1;
            target_tok = self.peek().cloned();
            shape = self.test_list()?;
        }
        Ok(())
    }

    fn test_list(&mut self) -> PResult<ExprShape> {
        let first = self.test()?;
        if !self.at_op(",") {
            return Ok(first);
        }
        let mut assignable = first.assignable();
        while self.eat_op(",") {
            if self.at_expr_end() {
                break;
            }
            assignable &= self.test()?.assignable();
        }
        Ok(ExprShape::Tuple { assignable })
    }

    fn at_expr_end(&self) -> bool {
        match self.peek() {
            None => true,
            Some(t) => {
                t.kind == TokenKind::Newline
                    || t.is_op("=")
                    || t.is_op(";")
                    || t.is_op(":")
                    || t.is_op(")")
                    || t.is_op("]")
                    || (t.kind == TokenKind::Operator && AUG_OPS.contains(&t.text.as_str()))
            }
        }
    }

    fn test(&mut self) -> PResult<ExprShape> {
        let shape = self.or_test()?;
        if self.at_keyword("if") {
            self.pos += 1;
            self.or_test()?;
            if !self.eat_keyword("else") {
                return Err(self.error_here("expected 'else'"));
            }
            self.test()?;
            return Ok(ExprShape::Other);
        }
        Ok(shape)
    }

    fn or_test(&mut self) -> PResult<ExprShape> {
        let mut shape = self.and_test()?;
        while self.eat_keyword("or") {
            self.and_test()?;
            shape = ExprShape::Other;
        }
        Ok(shape)
    }

    fn and_test(&mut self) -> PResult<ExprShape> {
        let mut shape = self.not_test()?;
        while self.eat_keyword("and") {
            self.not_test()?;
            shape = ExprShape::Other;
        }
        Ok(shape)
    }

    fn not_test(&mut self) -> PResult<ExprShape> {
        if self.eat_keyword("not") {
            self.not_test()?;
            return Ok(ExprShape::Other);
        }
        self.comparison()
    }

    fn comparison(&mut self) -> PResult<ExprShape> {
        let mut shape = self.or_expr()?;
        loop {
            let is_cmp = match self.peek() {
                Some(t) if t.kind == TokenKind::Operator && COMPARE_OPS.contains(&t.text.as_str()) => {
                    self.pos += 1;
                    true
                }
                Some(t) if t.is_keyword("in") => {
                    self.pos += 1;
                    true
                }
                Some(t) if t.is_keyword("not") && self.peek_at(1).is_some_and(|n| n.is_keyword("in")) => {
                    self.pos += 2;
                    true
                }
                Some(t) if t.is_keyword("is") => {
                    self.pos += 1;
                    self.eat_keyword("not");
                    true
                }
                _ => false,
            };
            if !is_cmp {
                return Ok(shape);
            }
            self.or_expr()?;
            shape = ExprShape::Other;
        }
    }

    fn or_expr(&mut self) -> PResult<ExprShape> {
        self.binary_level(0)
    }

    fn binary_level(&mut self, level: usize) -> PResult<ExprShape> {
        const LEVELS: &[&[&str]] = &[&["|"], &["^"], &["&"], &["<<", ">>"], &["+", "-"], &["*", "/", "//", "%", "@"]];
        if level == LEVELS.len() {
            return self.factor();
        }
        let mut shape = self.binary_level(level + 1)?;
        while self.peek().is_some_and(|t| t.kind == TokenKind::Operator && LEVELS[level].contains(&t.text.as_str())) {
            self.pos += 1;
            self.binary_level(level + 1)?;
            shape = ExprShape::Other;
        }
        Ok(shape)
    }

    fn factor(&mut self) -> PResult<ExprShape> {
        if self.at_op("-") || self.at_op("+") || self.at_op("~") {
            self.pos += 1;
            self.factor()?;
            return Ok(ExprShape::Other);
        }
        self.power()
    }

    fn power(&mut self) -> PResult<ExprShape> {
        let shape = self.primary()?;
        if self.eat_op("**") {
            self.factor()?;
            return Ok(ExprShape::Other);
        }
        Ok(shape)
    }

    fn primary(&mut self) -> PResult<ExprShape> {
        let mut shape = self.atom()?;
        loop {
            if self.eat_op("(") {
                self.call_args()?;
                self.expect_op(")")?;
                shape = ExprShape::Other;
            } else if self.eat_op("[") {
                self.subscript()?;
                self.expect_op("]")?;
                shape = ExprShape::Subscript;
            } else if self.eat_op(".") {
                self.expect_name()?;
                shape = ExprShape::Attribute;
            } else {
                return Ok(shape);
            }
        }
    }

    fn subscript(&mut self) -> PResult<()> {
        // index or slice: [a], [a:b], [:b], [a:], [:]
        if !self.at_op(":") {
            self.test_list()?;
        }
        if self.eat_op(":") {
            if !self.at_op("]") && !self.at_op(":") {
                self.test()?;
            }
            if self.eat_op(":") && !self.at_op("]") {
                self.test()?;
            }
        }
        Ok(())
    }

    fn call_args(&mut self) -> PResult<()> {
        let mut had_keyword = false;
        while !self.at_op(")") {
            let is_keyword_arg = self.peek().is_some_and(|t| t.kind == TokenKind::Identifier)
                && self.peek_at(1).is_some_and(|t| t.is_op("="));
            if is_keyword_arg {
                self.pos += 2;
                self.test()?;
                had_keyword = true;
            } else {
                if had_keyword {
                    return Err(self.error_here("positional argument follows keyword argument"));
                }
                self.test()?;
            }
            if !self.eat_op(",") {
                break;
            }
        }
        Ok(())
    }

    fn atom(&mut self) -> PResult<ExprShape> {
        let tok = match self.peek() {
            Some(t) => t,
            None => return Err(self.error_here("unexpected end of input")),
        };
        match tok.kind {
            TokenKind::Identifier => {
                self.pos += 1;
                Ok(ExprShape::Name)
            }
            TokenKind::Number => {
                self.pos += 1;
                Ok(ExprShape::Other)
            }
            TokenKind::String => {
                while self.at_kind(TokenKind::String) {
                    self.pos += 1;
                }
                Ok(ExprShape::Other)
            }
            TokenKind::Keyword if matches!(tok.text.as_str(), "True" | "False" | "None") => {
                self.pos += 1;
                Ok(ExprShape::Other)
            }
            TokenKind::Punct if tok.text == "(" => {
                self.pos += 1;
                if self.eat_op(")") {
                    return Ok(ExprShape::Tuple { assignable: false });
                }
                let inner = self.test_list()?;
                self.expect_op(")")?;
                Ok(inner)
            }
            TokenKind::Punct if tok.text == "[" => {
                self.pos += 1;
                let mut assignable = true;
                let mut empty = true;
                while !self.at_op("]") {
                    empty = false;
                    assignable &= self.test()?.assignable();
                    if !self.eat_op(",") {
                        break;
                    }
                }
                self.expect_op("]")?;
                Ok(ExprShape::Tuple { assignable: assignable && !empty })
            }
            TokenKind::Punct if tok.text == "{" => {
                self.pos += 1;
                while !self.at_op("}") {
                    self.test()?;
                    if self.eat_op(":") {
                        self.test()?;
                    }
                    if !self.eat_op(",") {
                        break;
                    }
                }
                self.expect_op("}")?;
                Ok(ExprShape::Other)
            }
            TokenKind::Indent => Err(self.error_here("unexpected indent")),
            _ => Err(self.error_here("invalid syntax")),
        }
    }
}
