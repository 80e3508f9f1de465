use super::lexer::{lex, Tok, Token};
use super::surface::*;
use super::ParseError;
use crate::expr::{Expr, Op, Value};
use crate::state::ModelKind;

/// Words that cannot name roles, variables, constants or definitions.
pub const KEYWORDS: &[&str] = &[
    "ctmc", "dtmc", "const", "role", "var", "init", "def", "main", "if", "then", "else", "end", "allsynch", "foreach",
    "rate", "bool", "true", "false", "not", "and", "or", "mod", "min", "max",
];

pub fn parse(src: &str) -> Result<SurfaceProgram, ParseError> {
    let mut p = Parser { toks: lex(src)?, pos: 0 };
    p.program()
}

/// Parse a single expression.
pub fn parse_expr(src: &str) -> Result<Expr, ParseError> {
    let mut p = Parser { toks: lex(src)?, pos: 0 };
    let e = p.expr()?;
    p.expect_eof()?;
    Ok(e)
}

struct Parser {
    toks: Vec<Token>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.pos].tok
    }

    fn peek_at(&self, k: usize) -> &Tok {
        &self.toks[(self.pos + k).min(self.toks.len() - 1)].tok
    }

    fn bump(&mut self) -> Tok {
        let t = self.toks[self.pos].tok.clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn error(&self, expected: &[&str]) -> ParseError {
        let t = &self.toks[self.pos];
        ParseError {
            line: t.line,
            col: t.col,
            found: t.tok.to_string(),
            expected: expected.iter().map(|s| s.to_string()).collect(),
        }
    }

    fn is_sym(&self, s: &str) -> bool {
        matches!(self.peek(), Tok::Sym(x) if *x == s)
    }

    fn is_kw(&self, kw: &str) -> bool {
        matches!(self.peek(), Tok::Ident(x) if x == kw)
    }

    fn eat_sym(&mut self, s: &str) -> bool {
        if self.is_sym(s) {
            self.bump();
            true
        } else {
            false
        }
    }

    fn eat_kw(&mut self, kw: &str) -> bool {
        if self.is_kw(kw) {
            self.bump();
            true
        } else {
            false
        }
    }

    fn sym(&mut self, s: &'static str) -> Result<(), ParseError> {
        if self.eat_sym(s) {
            Ok(())
        } else {
            Err(self.error(&[&format!("`{s}`")]))
        }
    }

    fn kw(&mut self, kw: &str) -> Result<(), ParseError> {
        if self.eat_kw(kw) {
            Ok(())
        } else {
            Err(self.error(&[&format!("`{kw}`")]))
        }
    }

    fn ident(&mut self, what: &str) -> Result<String, ParseError> {
        match self.peek() {
            Tok::Ident(s) if !KEYWORDS.contains(&s.as_str()) => {
                let s = s.clone();
                self.bump();
                Ok(s)
            }
            _ => Err(self.error(&[what])),
        }
    }

    fn expect_eof(&self) -> Result<(), ParseError> {
        match self.peek() {
            Tok::Eof => Ok(()),
            _ => Err(self.error(&["end of input"])),
        }
    }

    fn program(&mut self) -> Result<SurfaceProgram, ParseError> {
        let kind = if self.eat_kw("ctmc") {
            ModelKind::Ctmc
        } else if self.eat_kw("dtmc") {
            ModelKind::Dtmc
        } else {
            return Err(self.error(&["`ctmc`", "`dtmc`"]));
        };
        self.sym(";")?;
        let mut prog = SurfaceProgram {
            kind,
            consts: Vec::new(),
            roles: Vec::new(),
            vars: Vec::new(),
            definitions: Vec::new(),
            main: String::new(),
            expanded_families: Vec::new(),
        };
        let mut main = None;
        loop {
            if self.eat_kw("const") {
                let name = self.ident("a constant name")?;
                self.sym("=")?;
                let e = self.expr()?;
                self.sym(";")?;
                prog.consts.push((name, e));
            } else if self.eat_kw("role") {
                let name = self.ident("a role name")?;
                let size = if self.eat_sym("[") {
                    let e = self.expr()?;
                    self.sym("]")?;
                    Some(e)
                } else {
                    None
                };
                self.sym(";")?;
                prog.roles.push(RoleDecl { name, size });
            } else if self.eat_kw("var") {
                prog.vars.push(self.var_decl()?);
            } else if self.eat_kw("def") {
                let name = self.ident("a definition name")?;
                self.sym("=")?;
                let body = self.term()?;
                self.sym(";")?;
                prog.definitions.push((name, body));
            } else if self.is_kw("main") {
                if main.is_some() {
                    return Err(self.error(&["`const`", "`role`", "`var`", "`def`", "end of input"]));
                }
                self.bump();
                main = Some(self.ident("a definition name")?);
                self.sym(";")?;
            } else if matches!(self.peek(), Tok::Eof) {
                break;
            } else {
                return Err(self.error(&["`const`", "`role`", "`var`", "`def`", "`main`", "end of input"]));
            }
        }
        prog.main = match main {
            Some(m) => m,
            None => return Err(self.error(&["`main`"])),
        };
        Ok(prog)
    }

    fn var_decl(&mut self) -> Result<SurfaceVar, ParseError> {
        let name = self.ident("a variable name")?;
        let index = if self.eat_sym("[") {
            let e = self.expr()?;
            self.sym("]")?;
            Some(e)
        } else {
            None
        };
        self.sym("@")?;
        let owner = self.role_ref()?;
        self.sym(":")?;
        let range = if self.eat_kw("bool") {
            SurfaceRange::Bool
        } else if self.eat_sym("[") {
            let lo = self.expr()?;
            self.sym("..")?;
            let hi = self.expr()?;
            self.sym("]")?;
            SurfaceRange::Int { lo, hi }
        } else {
            return Err(self.error(&["`[`", "`bool`"]));
        };
        self.kw("init")?;
        let init = self.expr()?;
        self.sym(";")?;
        Ok(SurfaceVar { name, index, owner, range, init })
    }

    fn role_ref(&mut self) -> Result<RoleRef, ParseError> {
        let name = self.ident("a role name")?;
        let index = if self.eat_sym("[") {
            let e = self.expr()?;
            self.sym("]")?;
            Some(e)
        } else {
            None
        };
        Ok(RoleRef { name, index })
    }

    fn label(&mut self) -> Result<Option<String>, ParseError> {
        if self.eat_sym("[") {
            let l = self.ident("a label")?;
            self.sym("]")?;
            Ok(Some(l))
        } else {
            Ok(None)
        }
    }

    fn term(&mut self) -> Result<SurfaceTerm, ParseError> {
        if self.eat_kw("end") {
            return Ok(SurfaceTerm::Inact);
        }
        if self.eat_kw("if") {
            let guard = self.expr()?;
            self.sym("@")?;
            let at = self.role_ref()?;
            self.kw("then")?;
            let then_body = self.block()?;
            self.kw("else")?;
            let else_body = self.block()?;
            return Ok(SurfaceTerm::Conditional {
                guard,
                at,
                then_body: Box::new(then_body),
                else_body: Box::new(else_body),
            });
        }
        if self.eat_kw("allsynch") {
            self.sym("{")?;
            let mut entries = vec![self.sync_entry()?];
            while self.eat_sym("|") {
                entries.push(self.sync_entry()?);
            }
            self.sym("}")?;
            // `;` followed by a declaration ends the enclosing definition.
            let continues = self.is_sym(";")
                && !matches!(self.peek_at(1), Tok::Eof)
                && !["const", "role", "var", "def", "main"]
                    .iter()
                    .any(|k| matches!(self.peek_at(1), Tok::Ident(x) if x == k));
            let cont = if continues {
                self.bump();
                self.term()?
            } else {
                SurfaceTerm::Inact
            };
            return Ok(SurfaceTerm::AllSynch { entries, cont: Box::new(cont) });
        }
        let starts_interaction = self.is_sym("[") || matches!(self.peek_at(1), Tok::Sym("->") | Tok::Sym("["));
        if !starts_interaction {
            if let Tok::Ident(_) = self.peek() {
                return Ok(SurfaceTerm::Call(self.ident("a term")?));
            }
            return Err(self.error(&["`end`", "`if`", "`allsynch`", "an interaction", "a definition name"]));
        }
        let label = self.label()?;
        let initiator = self.role_ref()?;
        self.sym("->")?;
        let mut receivers = vec![self.role_ref()?];
        while self.eat_sym(",") {
            receivers.push(self.role_ref()?);
        }
        self.sym(":")?;
        self.sym("{")?;
        let mut branches = vec![self.branch()?];
        while self.eat_sym("|") {
            branches.push(self.branch()?);
        }
        self.sym("}")?;
        Ok(SurfaceTerm::Interaction(SurfaceInteraction { label, initiator, receivers, branches }))
    }

    fn block(&mut self) -> Result<SurfaceTerm, ParseError> {
        self.sym("{")?;
        let t = self.term()?;
        self.sym("}")?;
        Ok(t)
    }

    fn branch(&mut self) -> Result<SurfaceBranch, ParseError> {
        let label = self.label()?;
        self.eat_kw("rate");
        let weight = self.expr()?;
        self.sym(":")?;
        let update = self.updates()?;
        let cont = if self.eat_sym(";") { self.term()? } else { SurfaceTerm::Inact };
        Ok(SurfaceBranch { label, weight, update, cont })
    }

    fn sync_entry(&mut self) -> Result<SyncEntry, ParseError> {
        let role = self.role_ref()?;
        self.sym(":")?;
        let guard = self.expr()?;
        self.sym("->")?;
        let weight = self.expr()?;
        self.sym(":")?;
        let update = self.updates()?;
        Ok(SyncEntry { role, guard, weight, update })
    }

    fn updates(&mut self) -> Result<Vec<UpdateItem>, ParseError> {
        self.sym("{")?;
        let mut out = Vec::new();
        if !self.is_sym("}") {
            out.push(self.update()?);
            while self.eat_sym(",") {
                out.push(self.update()?);
            }
        }
        self.sym("}")?;
        Ok(out)
    }

    fn update(&mut self) -> Result<UpdateItem, ParseError> {
        if self.eat_kw("foreach") {
            self.sym("(")?;
            let binder = self.ident("an index name")?;
            let op = match self.bump() {
                Tok::Sym("=") => Op::Eq,
                Tok::Sym("!=") => Op::Ne,
                Tok::Sym("<") => Op::Lt,
                Tok::Sym("<=") => Op::Le,
                Tok::Sym(">") => Op::Gt,
                Tok::Sym(">=") => Op::Ge,
                _ => {
                    self.pos -= 1;
                    return Err(self.error(&["a comparison"]));
                }
            };
            let bound = self.expr()?;
            self.sym(")")?;
            let body = if self.is_sym("{") { self.updates()? } else { vec![self.update()?] };
            return Ok(UpdateItem::Foreach { binder, op, bound, body });
        }
        let target = self.ident("a variable name")?;
        let index = if self.eat_sym("[") {
            let e = self.expr()?;
            self.sym("]")?;
            Some(e)
        } else {
            None
        };
        self.sym("'")?;
        self.sym("=")?;
        let value = self.expr()?;
        Ok(UpdateItem::Assign { target, index, value })
    }

    // Expressions, loosest first: or, and, not, comparison, additive,
    // multiplicative, unary minus, primary.

    fn expr(&mut self) -> Result<Expr, ParseError> {
        let mut e = self.and_expr()?;
        while self.eat_sym("|") || self.eat_kw("or") {
            e = Expr::bin(Op::Or, e, self.and_expr()?);
        }
        Ok(e)
    }

    fn and_expr(&mut self) -> Result<Expr, ParseError> {
        let mut e = self.not_expr()?;
        while self.eat_sym("&") || self.eat_kw("and") {
            e = Expr::bin(Op::And, e, self.not_expr()?);
        }
        Ok(e)
    }

    fn not_expr(&mut self) -> Result<Expr, ParseError> {
        if self.eat_sym("!") || self.eat_kw("not") {
            return Ok(Expr::not(self.not_expr()?));
        }
        self.cmp_expr()
    }

    fn cmp_expr(&mut self) -> Result<Expr, ParseError> {
        let e = self.add_expr()?;
        let op = match self.peek() {
            Tok::Sym("=") => Op::Eq,
            Tok::Sym("!=") => Op::Ne,
            Tok::Sym("<") => Op::Lt,
            Tok::Sym("<=") => Op::Le,
            Tok::Sym(">") => Op::Gt,
            Tok::Sym(">=") => Op::Ge,
            _ => return Ok(e),
        };
        self.bump();
        Ok(Expr::bin(op, e, self.add_expr()?))
    }

    fn add_expr(&mut self) -> Result<Expr, ParseError> {
        let mut e = self.mul_expr()?;
        loop {
            let op = if self.eat_sym("+") {
                Op::Add
            } else if self.eat_sym("-") {
                Op::Sub
            } else {
                return Ok(e);
            };
            e = Expr::bin(op, e, self.mul_expr()?);
        }
    }

    fn mul_expr(&mut self) -> Result<Expr, ParseError> {
        let mut e = self.unary()?;
        loop {
            let op = if self.eat_sym("*") {
                Op::Mul
            } else if self.eat_sym("/") {
                Op::Div
            } else {
                return Ok(e);
            };
            e = Expr::bin(op, e, self.unary()?);
        }
    }

    fn unary(&mut self) -> Result<Expr, ParseError> {
        if self.eat_sym("-") {
            return Ok(match self.unary()? {
                Expr::Lit(Value::Int(i)) => Expr::int(-i),
                Expr::Lit(Value::Real(r)) => Expr::real(-r),
                e => Expr::bin(Op::Sub, Expr::int(0), e),
            });
        }
        self.primary()
    }

    fn primary(&mut self) -> Result<Expr, ParseError> {
        match self.peek().clone() {
            Tok::Int(i) => {
                self.bump();
                Ok(Expr::int(i))
            }
            Tok::Real(r) => {
                self.bump();
                Ok(Expr::real(r))
            }
            Tok::Sym("(") => {
                self.bump();
                let e = self.expr()?;
                self.sym(")")?;
                Ok(e)
            }
            Tok::Ident(s) if s == "true" || s == "false" => {
                self.bump();
                Ok(Expr::bool(s == "true"))
            }
            Tok::Ident(s) if (s == "mod" || s == "min" || s == "max") && self.peek_at(1) == &Tok::Sym("(") => {
                self.bump();
                self.bump();
                let mut args = vec![self.expr()?];
                while self.eat_sym(",") {
                    args.push(self.expr()?);
                }
                self.sym(")")?;
                let op = match s.as_str() {
                    "mod" => Op::Mod,
                    "min" => Op::Min,
                    _ => Op::Max,
                };
                if !op.arity_ok(args.len()) {
                    self.pos -= 1;
                    return Err(self.error(&[&format!("the right number of arguments to `{s}`")]));
                }
                Ok(Expr::app(op, args))
            }
            Tok::Ident(_) => {
                let name = self.ident("an expression")?;
                if self.eat_sym("[") {
                    let idx = self.expr()?;
                    self.sym("]")?;
                    Ok(Expr::Indexed(name, Box::new(idx)))
                } else {
                    Ok(Expr::var(name))
                }
            }
            _ => Err(self.error(&["an expression"])),
        }
    }
}
