//! Seeded program generator and differential runner.
//!
//! Generated programs are type-correct by construction and always terminate:
//! loops count up to small literals, calls only go to previously defined
//! functions (or to bounded recursive templates), and a cost estimate keeps
//! nested loops from multiplying into long runs. They still mix tags freely
//! through variables, object fields and return values, so the specializer
//! sees polymorphic sites, retyped shapes and invalidated continuations.

use std::fmt::Write as _;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::bbv::{Config, ExecError, Mode, Vm};
use crate::refinterp;
use crate::runtime::{Clock, HaltKind};

const MAX_COST: u64 = 4_000;
const EXPR_DEPTH: u32 = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Ty {
    Num,
    Str,
    Obj,
    Inst,
    Arr,
    /// `null` or an object whose `y` field is again a tree.
    Tree,
    Any,
}

const VALUE_TYS: [Ty; 6] = [Ty::Num, Ty::Str, Ty::Obj, Ty::Inst, Ty::Arr, Ty::Any];

#[derive(Debug, Clone)]
enum Kind {
    Plain,
    Ctor,
    /// `rec(n, acc)`: first argument must be a small non-negative int.
    Rec,
    MakeTree,
}

#[derive(Debug, Clone)]
struct Func {
    name: String,
    params: Vec<Ty>,
    ret: Ty,
    kind: Kind,
    cost: u64,
}

#[derive(Clone)]
struct Scope {
    vars: Vec<(String, Ty)>,
    /// Loop counters: readable as numbers, never assigned.
    counters: Vec<String>,
    mult: u64,
    /// Functions callable from here (`funcs[..callable]`).
    callable: usize,
}

struct Gen {
    rng: ChaCha8Rng,
    next: u32,
    funcs: Vec<Func>,
    cost: u64,
}

impl Gen {
    fn fresh(&mut self, prefix: &str) -> String {
        self.next += 1;
        format!("{prefix}{}", self.next)
    }

    fn chance(&mut self, p: f64) -> bool {
        self.rng.gen_bool(p)
    }

    fn pick<T: Clone>(&mut self, xs: &[T]) -> T {
        xs.choose(&mut self.rng).expect("non-empty choice").clone()
    }

    fn num_lit(&mut self) -> String {
        match self.rng.gen_range(0..10) {
            0 => format!("{}", self.rng.gen_range(1_000_000_000..2_000_000_000)),
            1 | 2 => format!("{}.{}", self.rng.gen_range(0..100), self.rng.gen_range(1..10)),
            _ => format!("{}", self.rng.gen_range(0..20)),
        }
    }

    fn str_lit(&mut self) -> String {
        let words = ["", "a", "bc", "def", "x y"];
        format!("\"{}\"", self.pick(&words))
    }

    fn vars_of(&self, scope: &Scope, ty: Ty) -> Vec<String> {
        scope.vars.iter().filter(|(_, t)| *t == ty || (ty == Ty::Obj && *t == Ty::Inst)).map(|(n, _)| n.clone()).collect()
    }

    fn callable(&self, scope: &Scope, ret: Ty) -> Vec<usize> {
        (0..scope.callable)
            .filter(|&i| {
                let f = &self.funcs[i];
                f.ret == ret && self.cost + scope.mult * f.cost <= MAX_COST
            })
            .collect()
    }

    fn call(&mut self, scope: &Scope, i: usize, depth: u32) -> String {
        let f = self.funcs[i].clone();
        self.cost += scope.mult * f.cost;
        let args: Vec<String> = match f.kind {
            Kind::Rec => vec![self.small(scope), self.expr(Ty::Num, depth, scope)],
            Kind::MakeTree => vec![self.small(scope)],
            _ => f.params.iter().map(|t| self.expr(*t, depth, scope)).collect(),
        };
        let call = format!("{}({})", f.name, args.join(", "));
        if matches!(f.kind, Kind::Ctor) {
            format!("new {call}")
        } else {
            call
        }
    }

    fn small(&mut self, scope: &Scope) -> String {
        if !scope.counters.is_empty() && self.chance(0.3) {
            return self.pick(&scope.counters);
        }
        format!("{}", self.rng.gen_range(0..10))
    }

    fn atom(&mut self, ty: Ty, scope: &Scope) -> String {
        let vars = self.vars_of(scope, ty);
        if !vars.is_empty() && self.chance(0.6) {
            return self.pick(&vars);
        }
        match ty {
            Ty::Num => {
                if !scope.counters.is_empty() && self.chance(0.3) {
                    self.pick(&scope.counters)
                } else {
                    self.num_lit()
                }
            }
            Ty::Str => self.str_lit(),
            Ty::Obj => format!("({{x: {}, y: {}}})", self.num_lit(), self.str_lit()),
            Ty::Inst => match self.callable(scope, Ty::Inst).into_iter().find(|&i| matches!(self.funcs[i].kind, Kind::Ctor)) {
                Some(i) => self.call(scope, i, 0),
                None => {
                    let k = self.fresh("p");
                    format!("({{x: {}, y: null, m: function ({k}) {{ return this.x * {k}; }}}})", self.num_lit())
                }
            },
            Ty::Arr => format!("[{}, {}]", self.num_lit(), self.str_lit()),
            Ty::Tree => "null".to_string(),
            Ty::Any => match self.rng.gen_range(0..5) {
                0 => "null".into(),
                1 => "undefined".into(),
                2 => "true".into(),
                3 => self.str_lit(),
                _ => self.num_lit(),
            },
        }
    }

    fn expr(&mut self, ty: Ty, depth: u32, scope: &Scope) -> String {
        if depth == 0 || self.chance(0.3) {
            return self.atom(ty, scope);
        }
        let d = depth - 1;
        let calls = self.callable(scope, ty);
        if !calls.is_empty() && self.chance(0.25) {
            let i = self.pick(&calls);
            return self.call(scope, i, d);
        }
        match ty {
            Ty::Num => match self.rng.gen_range(0..9) {
                0..=2 => {
                    let op = self.pick(&["+", "-", "*", "/"]);
                    format!("({} {op} {})", self.expr(Ty::Num, d, scope), self.expr(Ty::Num, d, scope))
                }
                3 => format!("({} % {})", self.expr(Ty::Num, d, scope), self.rng.gen_range(1..7)),
                4 => format!("(-{})", self.expr(Ty::Num, d, scope)),
                5 => format!("{}.x", self.expr(Ty::Obj, d, scope)),
                6 => format!("{}.length", self.expr(Ty::Arr, d, scope)),
                7 => format!("{}.length", self.expr(Ty::Str, d, scope)),
                _ => {
                    let insts = self.vars_of(scope, Ty::Inst);
                    if insts.is_empty() {
                        self.atom(Ty::Num, scope)
                    } else {
                        let o = self.pick(&insts);
                        format!("{o}.m({})", self.expr(Ty::Num, d, scope))
                    }
                }
            },
            Ty::Str => {
                let lit = self.str_lit();
                let e = self.expr(Ty::Str, d, scope);
                if self.chance(0.5) {
                    format!("({e} + {lit})")
                } else {
                    format!("({lit} + {e})")
                }
            }
            Ty::Obj => {
                if self.chance(0.3) {
                    self.expr(Ty::Inst, depth, scope)
                } else {
                    format!("({{x: {}, y: {}}})", self.expr(Ty::Num, d, scope), self.expr(Ty::Any, d, scope))
                }
            }
            Ty::Inst => self.atom(Ty::Inst, scope),
            Ty::Arr => format!("[{}, {}, {}]", self.expr(Ty::Num, d, scope), self.expr(Ty::Any, d, scope), self.expr(Ty::Any, d, scope)),
            Ty::Tree => self.atom(Ty::Tree, scope),
            Ty::Any => match self.rng.gen_range(0..10) {
                0..=3 => {
                    let t = self.pick(&[Ty::Num, Ty::Str, Ty::Obj, Ty::Arr, Ty::Inst]);
                    self.expr(t, depth, scope)
                }
                4 => format!("{}.y", self.expr(Ty::Obj, d, scope)),
                5 => format!("{}.z", self.expr(Ty::Obj, d, scope)),
                6 => format!("{}[{}]", self.expr(Ty::Arr, d, scope), self.rng.gen_range(0..4)),
                7 => {
                    let t1 = self.pick(&VALUE_TYS);
                    let t2 = self.pick(&VALUE_TYS);
                    let op = self.pick(&["==", "!="]);
                    format!("({} {op} {})", self.expr(t1, d, scope), self.expr(t2, d, scope))
                }
                8 => {
                    let op = self.pick(&["<", "<=", ">", ">="]);
                    format!("({} {op} {})", self.expr(Ty::Num, d, scope), self.expr(Ty::Num, d, scope))
                }
                _ => {
                    let t = self.pick(&VALUE_TYS);
                    match self.rng.gen_range(0..3) {
                        0 => format!("!{}", self.expr(t, d, scope)),
                        1 => format!("({} && {})", self.expr(t, d, scope), self.expr(Ty::Any, d, scope)),
                        _ => format!("({} || {})", self.expr(t, d, scope), self.expr(Ty::Any, d, scope)),
                    }
                }
            },
        }
    }

    fn cond(&mut self, scope: &Scope) -> String {
        let t = self.pick(&VALUE_TYS);
        let e = self.expr(Ty::Any, 2, scope);
        match self.rng.gen_range(0..4) {
            0 => format!("{} < {}", self.expr(Ty::Num, 1, scope), self.expr(Ty::Num, 1, scope)),
            1 => format!("{} == {}", self.expr(t, 1, scope), self.expr(t, 1, scope)),
            2 => format!("{e} && {}", self.expr(Ty::Any, 1, scope)),
            _ => e,
        }
    }

    fn block(&mut self, scope: &mut Scope, depth: u32, out: &mut String, indent: usize) {
        let n = self.rng.gen_range(1..=4);
        let saved = scope.vars.len();
        for _ in 0..n {
            self.stmt(scope, depth, out, indent);
        }
        scope.vars.truncate(saved);
    }

    fn stmt(&mut self, scope: &mut Scope, depth: u32, out: &mut String, indent: usize) {
        self.cost += scope.mult;
        let pad = "    ".repeat(indent);
        let roll = self.rng.gen_range(0..12);
        match roll {
            0 | 1 => {
                let e = self.expr(Ty::Any, EXPR_DEPTH, scope);
                let _ = writeln!(out, "{pad}print({e});");
            }
            2 | 3 => {
                let ty = self.pick(&VALUE_TYS);
                let name = self.fresh("v");
                let e = self.expr(ty, EXPR_DEPTH, scope);
                let _ = writeln!(out, "{pad}var {name} = {e};");
                scope.vars.push((name, ty));
            }
            4 | 5 if !scope.vars.is_empty() => {
                let (name, ty) = self.pick(&scope.vars);
                let rhs_ty = if ty == Ty::Any { self.pick(&VALUE_TYS) } else { ty };
                let e = self.expr(rhs_ty, EXPR_DEPTH, scope);
                match ty {
                    Ty::Num if self.chance(0.3) => {
                        let op = self.pick(&["+=", "-=", "*="]);
                        let _ = writeln!(out, "{pad}{name} {op} {e};");
                    }
                    Ty::Str if self.chance(0.3) => {
                        let lit = self.str_lit();
                        let _ = writeln!(out, "{pad}{name} += {lit};");
                    }
                    _ => {
                        let _ = writeln!(out, "{pad}{name} = {e};");
                    }
                }
            }
            6 => {
                let o = self.expr(Ty::Obj, 1, scope);
                match self.rng.gen_range(0..4) {
                    0 => {
                        let e = self.expr(Ty::Num, 2, scope);
                        let _ = writeln!(out, "{pad}{o}.x = {e};");
                    }
                    1 => {
                        let e = self.expr(Ty::Num, 2, scope);
                        let _ = writeln!(out, "{pad}{o}.x += {e};");
                    }
                    2 => {
                        let e = self.expr(Ty::Any, 2, scope);
                        let _ = writeln!(out, "{pad}{o}.y = {e};");
                    }
                    _ => {
                        let e = self.expr(Ty::Any, 2, scope);
                        let _ = writeln!(out, "{pad}{o}.z = {e};");
                    }
                }
            }
            7 => {
                let a = self.expr(Ty::Arr, 1, scope);
                let k = self.rng.gen_range(0..5);
                let e = self.expr(Ty::Any, 2, scope);
                let _ = writeln!(out, "{pad}{a}[{k}] = {e};");
            }
            8 if depth > 0 => {
                let c = self.cond(scope);
                let _ = writeln!(out, "{pad}if ({c}) {{");
                self.block(scope, depth - 1, out, indent + 1);
                if self.chance(0.5) {
                    let _ = writeln!(out, "{pad}}} else {{");
                    self.block(scope, depth - 1, out, indent + 1);
                }
                let _ = writeln!(out, "{pad}}}");
            }
            9 if depth > 0 => {
                let i = self.fresh("i");
                let k = self.rng.gen_range(1..=5);
                let _ = writeln!(out, "{pad}var {i} = 0;");
                let _ = writeln!(out, "{pad}while ({i} < {k}) {{");
                let mut inner = scope.clone();
                inner.counters.push(i.clone());
                inner.mult *= k;
                self.block(&mut inner, depth - 1, out, indent + 1);
                let _ = writeln!(out, "{pad}    {i} = {i} + 1;");
                let _ = writeln!(out, "{pad}}}");
            }
            10 => {
                let trees: Vec<usize> = (0..scope.callable).filter(|&i| self.funcs[i].params == [Ty::Tree]).collect();
                let makers = self.callable(scope, Ty::Tree);
                match (trees.first(), makers.first()) {
                    (Some(&s), Some(&m)) if self.cost + scope.mult * (self.funcs[s].cost + self.funcs[m].cost) <= MAX_COST => {
                        let tree = self.call(scope, m, 0);
                        self.cost += scope.mult * self.funcs[s].cost;
                        let _ = writeln!(out, "{pad}print({}({tree}));", self.funcs[s].name);
                    }
                    _ => {
                        let e = self.expr(Ty::Num, EXPR_DEPTH, scope);
                        let _ = writeln!(out, "{pad}print({e});");
                    }
                }
            }
            _ => {
                let ty = self.pick(&VALUE_TYS);
                let calls = self.callable(scope, ty);
                let e = match calls.first() {
                    Some(_) => {
                        let i = self.pick(&calls);
                        self.call(scope, i, 2)
                    }
                    None => self.expr(ty, EXPR_DEPTH, scope),
                };
                let _ = writeln!(out, "{pad}print({e});");
            }
        }
    }

    fn function(&mut self, out: &mut String, globals: &[(String, Ty)]) {
        let idx = self.funcs.len();
        match self.rng.gen_range(0..8) {
            0 => {
                let name = self.fresh("C");
                let (a, b, k) = (self.fresh("p"), self.fresh("p"), self.fresh("p"));
                let _ = writeln!(
                    out,
                    "function {name}({a}, {b}) {{\n    this.x = {a};\n    this.y = {b};\n    this.m = function ({k}) {{ return this.x + {k}; }};\n}}\n"
                );
                self.funcs.push(Func { name, params: vec![Ty::Num, Ty::Any], ret: Ty::Inst, kind: Kind::Ctor, cost: 5 });
            }
            1 => {
                let name = self.fresh("rec");
                let (n, acc) = (self.fresh("p"), self.fresh("p"));
                let step = self.pick(&[format!("{acc} + {n}"), format!("{acc} * 2"), format!("{acc} - {n} / 2")]);
                let _ = writeln!(
                    out,
                    "function {name}({n}, {acc}) {{\n    if ({n} <= 0) return {acc};\n    return {name}({n} - 1, {step});\n}}\n"
                );
                self.funcs.push(Func { name, params: vec![Ty::Num, Ty::Num], ret: Ty::Num, kind: Kind::Rec, cost: 12 });
            }
            2 => {
                let mk = self.fresh("mk");
                let d = self.fresh("p");
                let _ = writeln!(
                    out,
                    "function {mk}({d}) {{\n    if ({d} <= 0) return null;\n    return {{x: {d}, y: {mk}({d} - 1)}};\n}}\n"
                );
                self.funcs.push(Func { name: mk, params: vec![Ty::Num], ret: Ty::Tree, kind: Kind::MakeTree, cost: 12 });
                let walk = self.fresh("walk");
                let t = self.fresh("p");
                let _ = writeln!(
                    out,
                    "function {walk}({t}) {{\n    if ({t} == null) return 0;\n    return {t}.x + {walk}({t}.y);\n}}\n"
                );
                self.funcs.push(Func { name: walk, params: vec![Ty::Tree], ret: Ty::Num, kind: Kind::Plain, cost: 12 });
            }
            _ => {
                let name = self.fresh("f");
                let nparams = self.rng.gen_range(0..=3);
                let params: Vec<(String, Ty)> = (0..nparams)
                    .map(|_| {
                        let t = self.pick(&VALUE_TYS);
                        (self.fresh("p"), t)
                    })
                    .collect();
                let ret = self.pick(&VALUE_TYS);
                let mut scope = Scope {
                    vars: params.iter().cloned().chain(globals.iter().cloned()).collect(),
                    counters: Vec::new(),
                    mult: 1,
                    callable: idx,
                };
                let names: Vec<&str> = params.iter().map(|(n, _)| n.as_str()).collect();
                let mut body = String::new();
                self.cost = 0;
                self.block(&mut scope, 2, &mut body, 1);
                if ret == Ty::Any && self.chance(0.7) {
                    let c = self.cond(&scope);
                    let t1 = self.pick(&VALUE_TYS);
                    let e1 = self.expr(t1, 2, &scope);
                    let _ = writeln!(body, "    if ({c}) return {e1};");
                }
                let e = self.expr(ret, 2, &scope);
                let _ = writeln!(body, "    return {e};");
                let _ = writeln!(out, "function {name}({}) {{\n{body}}}\n", names.join(", "));
                let cost = self.cost.max(1);
                let params = params.into_iter().map(|(_, t)| t).collect();
                self.funcs.push(Func { name, params, ret, kind: Kind::Plain, cost });
            }
        }
    }
}

/// Generates one program from `seed`.
pub fn generate(seed: u64) -> String {
    let mut g = Gen { rng: ChaCha8Rng::seed_from_u64(seed), next: 0, funcs: Vec::new(), cost: 0 };
    let mut out = String::new();
    let globals: Vec<(String, Ty)> =
        [Ty::Num, Ty::Str, Ty::Obj, Ty::Arr, Ty::Any].iter().map(|t| (g.fresh("g"), *t)).collect();
    for _ in 0..g.rng.gen_range(2..=5) {
        g.function(&mut out, &globals);
    }
    let mut scope = Scope { vars: Vec::new(), counters: Vec::new(), mult: 1, callable: g.funcs.len() };
    g.cost = 0;
    for (name, ty) in &globals {
        let init = g.atom(if *ty == Ty::Any { Ty::Num } else { *ty }, &scope);
        let _ = writeln!(out, "var {name} = {init};");
    }
    scope.vars.extend(globals.iter().cloned());
    for _ in 0..g.rng.gen_range(4..=10) {
        g.stmt(&mut scope, 2, &mut out, 0);
    }
    out
}

/// One disagreement between the reference interpreter and the VM.
#[derive(Debug, Clone, PartialEq)]
pub struct Mismatch {
    pub seed: u64,
    pub mode: Option<Mode>,
    pub detail: String,
    pub source: String,
}

/// Summary of a fuzz campaign.
#[derive(Debug, Clone, Default)]
pub struct FuzzReport {
    pub programs: usize,
    /// Programs that stopped on a halt (in every engine alike).
    pub halted: usize,
    pub mismatches: Vec<Mismatch>,
}

fn vm_result(r: Result<(), ExecError>) -> Result<Result<(), HaltKind>, String> {
    match r {
        Ok(()) => Ok(Ok(())),
        Err(ExecError::Halt(h)) => Ok(Err(h)),
        Err(e) => Err(e.to_string()),
    }
}

/// Runs `source` through the reference interpreter and every versioning mode.
pub fn check_program(seed: u64, source: &str) -> Result<bool, Mismatch> {
    let mismatch = |mode, detail: String| Mismatch { seed, mode, detail, source: source.to_string() };
    let path = format!("fuzz-{seed}.js");
    let reference = refinterp::interpret(&path, source, 0).map_err(|e| mismatch(None, format!("frontend: {e}")))?;
    let module = crate::compile(&path, source).map_err(|e| mismatch(None, format!("compile: {e}")))?;
    for mode in Mode::LADDER {
        let mut cfg = Config { validate: true, clock: Clock::fixed(), ..Config::new(mode) };
        cfg.limits.budget = 200_000_000;
        let mut vm = Vm::new(&module, cfg);
        let result = vm_result(vm.run_main()).map_err(|e| mismatch(Some(mode), e))?;
        if vm.output() != reference.output || result != reference.result {
            return Err(mismatch(
                Some(mode),
                format!(
                    "reference {:?} / {:?}, vm {:?} / {:?}",
                    reference.result,
                    reference.output,
                    result,
                    vm.output()
                ),
            ));
        }
        if mode == Mode::Baseline {
            let s = vm.stats(&path);
            if s.dyn_tag_tests != reference.implicit_tests {
                return Err(mismatch(
                    Some(mode),
                    format!("baseline ran {} tag tests, reference counted {}", s.dyn_tag_tests, reference.implicit_tests),
                ));
            }
        }
    }
    Ok(reference.result.is_err())
}

/// Seed of the `i`-th program of a campaign.
pub fn program_seed(seed: u64, i: usize) -> u64 {
    seed.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(i as u64)
}

pub fn campaign(seed: u64, count: usize) -> FuzzReport {
    let mut report = FuzzReport::default();
    for i in 0..count {
        let s = program_seed(seed, i);
        let src = generate(s);
        report.programs += 1;
        match check_program(s, &src) {
            Ok(halted) => report.halted += halted as usize,
            Err(m) => report.mismatches.push(m),
        }
    }
    report
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn generation_is_deterministic() {
        assert_eq!(generate(7), generate(7));
        assert_ne!(generate(7), generate(8));
    }

    #[test]
    fn generated_programs_compile() {
        for s in 0..50 {
            let src = generate(s);
            crate::compile("g.js", &src).unwrap_or_else(|e| panic!("{e}\n{src}"));
        }
    }
}
