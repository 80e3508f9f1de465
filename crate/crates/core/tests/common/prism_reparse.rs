//! A small reader for the PRISM subset the emitter writes, used as an
//! independent oracle: emitted text is read back into a model and its
//! chain compared with the chain of the original network.

use chorprism::expr::{eval_const, eval_weight, Assign, Consts, Expr, Op, UpdateList, Value};
use chorprism::prism::{compose_left_fold, PrismCommand, PrismModel, PrismModule, Weight};
use chorprism::state::{ModelKind, RoleId, VarDecl, VarRange};

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Ident(String),
    Int(i64),
    Real(f64),
    Sym(&'static str),
}

const SYMS: [&str; 24] = [
    "..", "->", "<=", ">=", "!=", "'", "[", "]", "(", ")", "{", "}", ";", ":", ",", "=", "<", ">", "+", "-", "*", "/",
    "&", "|",
];

fn lex(src: &str) -> Vec<Tok> {
    let b = src.as_bytes();
    let mut i = 0;
    let mut out = Vec::new();
    'outer: while i < b.len() {
        let c = b[i] as char;
        if c.is_whitespace() {
            i += 1;
            continue;
        }
        if src[i..].starts_with("//") {
            while i < b.len() && b[i] != b'\n' {
                i += 1;
            }
            continue;
        }
        if c.is_ascii_digit() {
            let start = i;
            while i < b.len() && b[i].is_ascii_digit() {
                i += 1;
            }
            let mut real = false;
            if i + 1 < b.len() && b[i] == b'.' && b[i + 1].is_ascii_digit() {
                real = true;
                i += 1;
                while i < b.len() && b[i].is_ascii_digit() {
                    i += 1;
                }
            }
            if i < b.len() && (b[i] == b'e' || b[i] == b'E') {
                real = true;
                i += 1;
                if b[i] == b'-' || b[i] == b'+' {
                    i += 1;
                }
                while i < b.len() && b[i].is_ascii_digit() {
                    i += 1;
                }
            }
            let text = &src[start..i];
            out.push(if real { Tok::Real(text.parse().unwrap()) } else { Tok::Int(text.parse().unwrap()) });
            continue;
        }
        if c.is_ascii_alphabetic() || c == '_' {
            let start = i;
            while i < b.len() && (b[i].is_ascii_alphanumeric() || b[i] == b'_') {
                i += 1;
            }
            out.push(Tok::Ident(src[start..i].to_string()));
            continue;
        }
        for s in SYMS {
            if src[i..].starts_with(s) {
                out.push(Tok::Sym(s));
                i += s.len();
                continue 'outer;
            }
        }
        if c == '!' {
            out.push(Tok::Sym("!"));
            i += 1;
            continue;
        }
        panic!("unexpected character {c:?} at byte {i}");
    }
    out
}

struct P {
    toks: Vec<Tok>,
    pos: usize,
}

impl P {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos)
    }

    fn next(&mut self) -> Tok {
        let t = self.toks.get(self.pos).cloned().expect("unexpected end of input");
        self.pos += 1;
        t
    }

    fn is_sym(&self, s: &str) -> bool {
        matches!(self.peek(), Some(Tok::Sym(x)) if *x == s)
    }

    fn is_kw(&self, k: &str) -> bool {
        matches!(self.peek(), Some(Tok::Ident(x)) if x == k)
    }

    fn sym(&mut self, s: &str) {
        match self.next() {
            Tok::Sym(x) if x == s => {}
            t => panic!("expected `{s}`, found {t:?}"),
        }
    }

    fn ident(&mut self) -> String {
        match self.next() {
            Tok::Ident(x) => x,
            t => panic!("expected identifier, found {t:?}"),
        }
    }

    fn int(&mut self) -> i64 {
        let neg = if self.is_sym("-") {
            self.pos += 1;
            true
        } else {
            false
        };
        match self.next() {
            Tok::Int(v) => {
                if neg {
                    -v
                } else {
                    v
                }
            }
            t => panic!("expected integer, found {t:?}"),
        }
    }

    fn expr(&mut self) -> Expr {
        let mut e = self.and();
        while self.is_sym("|") {
            self.pos += 1;
            e = Expr::bin(Op::Or, e, self.and());
        }
        e
    }

    fn and(&mut self) -> Expr {
        let mut e = self.not();
        while self.is_sym("&") {
            self.pos += 1;
            e = Expr::bin(Op::And, e, self.not());
        }
        e
    }

    fn not(&mut self) -> Expr {
        if self.is_sym("!") {
            self.pos += 1;
            return Expr::not(self.not());
        }
        self.cmp()
    }

    fn cmp(&mut self) -> Expr {
        let e = self.add();
        let op = match self.peek() {
            Some(Tok::Sym("=")) => Op::Eq,
            Some(Tok::Sym("!=")) => Op::Ne,
            Some(Tok::Sym("<")) => Op::Lt,
            Some(Tok::Sym("<=")) => Op::Le,
            Some(Tok::Sym(">")) => Op::Gt,
            Some(Tok::Sym(">=")) => Op::Ge,
            _ => return e,
        };
        self.pos += 1;
        Expr::bin(op, e, self.add())
    }

    fn add(&mut self) -> Expr {
        let mut e = self.mul();
        loop {
            let op = match self.peek() {
                Some(Tok::Sym("+")) => Op::Add,
                Some(Tok::Sym("-")) => Op::Sub,
                _ => return e,
            };
            self.pos += 1;
            e = Expr::bin(op, e, self.mul());
        }
    }

    fn mul(&mut self) -> Expr {
        let mut e = self.unary();
        loop {
            let op = match self.peek() {
                Some(Tok::Sym("*")) => Op::Mul,
                Some(Tok::Sym("/")) => Op::Div,
                _ => return e,
            };
            self.pos += 1;
            e = Expr::bin(op, e, self.unary());
        }
    }

    fn unary(&mut self) -> Expr {
        if self.is_sym("-") {
            self.pos += 1;
            return match self.unary() {
                Expr::Lit(Value::Int(v)) => Expr::int(-v),
                Expr::Lit(Value::Real(v)) => Expr::real(-v),
                e => Expr::bin(Op::Sub, Expr::int(0), e),
            };
        }
        self.atom()
    }

    fn args(&mut self) -> Vec<Expr> {
        self.sym("(");
        let mut a = vec![self.expr()];
        while self.is_sym(",") {
            self.pos += 1;
            a.push(self.expr());
        }
        self.sym(")");
        a
    }

    fn atom(&mut self) -> Expr {
        match self.next() {
            Tok::Int(v) => Expr::int(v),
            Tok::Real(v) => Expr::real(v),
            Tok::Sym("(") => {
                let e = self.expr();
                self.sym(")");
                e
            }
            Tok::Ident(x) => match x.as_str() {
                "true" => Expr::bool(true),
                "false" => Expr::bool(false),
                "min" => Expr::app(Op::Min, self.args()),
                "max" => Expr::app(Op::Max, self.args()),
                "mod" => Expr::app(Op::Mod, self.args()),
                "floor" => {
                    let mut a = self.args();
                    assert_eq!(a.len(), 1);
                    match a.pop().unwrap() {
                        e @ Expr::App(Op::Div, _) => e,
                        e => panic!("floor is only emitted around a division, found {e}"),
                    }
                }
                "real" => {
                    let mut a = self.args();
                    match a.pop().unwrap() {
                        Expr::Lit(Value::Int(v)) => Expr::real(v as f64),
                        Expr::Lit(Value::Real(v)) => Expr::real(v),
                        e => panic!("real() of a non-literal {e}"),
                    }
                }
                _ => Expr::var(x),
            },
            t => panic!("unexpected token {t:?}"),
        }
    }

    fn var_decl(&mut self, owner: &str) -> VarDecl {
        let name = self.ident();
        self.sym(":");
        let range = if self.is_kw("bool") {
            self.pos += 1;
            VarRange::Bool
        } else {
            self.sym("[");
            let lo = self.int();
            self.sym("..");
            let hi = self.int();
            self.sym("]");
            VarRange::Int { lo, hi }
        };
        assert_eq!(self.ident(), "init");
        let init = match self.next() {
            Tok::Ident(b) if b == "true" => Value::Bool(true),
            Tok::Ident(b) if b == "false" => Value::Bool(false),
            Tok::Int(v) => Value::Int(v),
            Tok::Sym("-") => match self.next() {
                Tok::Int(v) => Value::Int(-v),
                t => panic!("bad init {t:?}"),
            },
            t => panic!("bad init {t:?}"),
        };
        self.sym(";");
        VarDecl { name, owner: RoleId::new(owner), range, init }
    }

    fn update(&mut self) -> UpdateList {
        if self.is_kw("true") {
            self.pos += 1;
            return UpdateList::new(vec![]);
        }
        let mut assigns = Vec::new();
        loop {
            self.sym("(");
            let target = self.ident();
            self.sym("'");
            self.sym("=");
            let value = self.expr();
            self.sym(")");
            assigns.push(Assign::new(&target, value));
            if !self.is_sym("&") {
                return UpdateList::new(assigns);
            }
            self.pos += 1;
        }
    }

    fn command(&mut self, consts: &Consts) -> PrismCommand {
        self.sym("[");
        let label = if self.is_sym("]") { None } else { Some(self.ident()) };
        self.sym("]");
        let guard = self.expr();
        self.sym("->");
        let mut branches = Vec::new();
        loop {
            let w = self.expr();
            self.sym(":");
            let u = self.update();
            let value = eval_weight(&w, consts).expect("weight must be constant");
            branches.push((Weight::new(value, w), u));
            if !self.is_sym("+") {
                break;
            }
            self.pos += 1;
        }
        self.sym(";");
        PrismCommand { label, guard, branches }
    }
}

/// Parsed module text, kept apart from the network so tests can inspect it.
pub struct Reparsed {
    pub model: PrismModel,
    pub modules: Vec<PrismModule>,
}

pub fn reparse(src: &str) -> Reparsed {
    let mut p = P { toks: lex(src), pos: 0 };
    let kind = match p.ident().as_str() {
        "ctmc" => ModelKind::Ctmc,
        "dtmc" => ModelKind::Dtmc,
        k => panic!("unknown model kind {k}"),
    };
    let mut consts = Consts::new();
    let mut modules = Vec::new();
    while p.peek().is_some() {
        match p.ident().as_str() {
            "const" => {
                let ty = p.ident();
                let name = p.ident();
                p.sym("=");
                let e = p.expr();
                p.sym(";");
                let v = eval_const(&e, &consts).unwrap();
                let v = match (ty.as_str(), v) {
                    ("double", Value::Int(i)) => Value::Real(i as f64),
                    ("int", v @ Value::Int(_)) | ("double", v @ Value::Real(_)) | ("bool", v @ Value::Bool(_)) => v,
                    (t, v) => panic!("constant {name}: {t} with value {v}"),
                };
                consts.insert(name, v);
            }
            "module" => {
                let name = p.ident();
                let mut vars = Vec::new();
                while !p.is_sym("[") && !p.is_kw("endmodule") {
                    vars.push(p.var_decl(&name));
                }
                let mut commands = Vec::new();
                while !p.is_kw("endmodule") {
                    commands.push(p.command(&consts));
                }
                p.pos += 1;
                modules.push(PrismModule { name: RoleId::new(&name), vars, commands });
            }
            t => panic!("unexpected top-level `{t}`"),
        }
    }
    let network = compose_left_fold(modules.clone());
    Reparsed { model: PrismModel { kind, consts, network }, modules }
}
