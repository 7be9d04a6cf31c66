//! Lazy basic block versioning engine.
//!
//! Code is compiled one block version at a time, at the moment control first
//! reaches it, under the type context flowing into it. Versions are cached per
//! `(block, context key)`; past the per-block cap every further request gets
//! the block's generic version, compiled under the empty context.
//!
//! Calls to a callee whose identity is in the context jump to an entry point
//! specialized on the argument tags. The code after a call is a lazily
//! compiled continuation: on first return it is specialized on the callee's
//! memorized return tag, and it is turned back into a stub if that tag is
//! later contradicted.

mod compile;
mod inspect;

use std::cell::Cell;
use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;
use std::rc::Rc;
use std::str::FromStr;

use thiserror::Error;

use crate::ir::liveness::Liveness;
use crate::ir::{ArithOp, BlockId, CacheId, FuncId, GlobalId, Inst, Module, Reg, SiteId};
use crate::runtime::{self, Clock, HaltKind, Heap, Value};
use crate::shapes::ShapeId;
use crate::stats::{SiteTally, StatsReport, SCHEMA_VERSION};
use crate::typesys::{ContextKey, TagKind, TypeContext, TypeTag};

pub use inspect::EntrySummary;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Mode {
    Baseline,
    Intra,
    Shapes,
    Entry,
    EntryCont,
    Oracle,
}

impl Mode {
    /// The versioning modes, least to most capable.
    pub const LADDER: [Mode; 5] = [Mode::Baseline, Mode::Intra, Mode::Shapes, Mode::Entry, Mode::EntryCont];
    pub const ALL: [Mode; 6] = [Mode::Baseline, Mode::Intra, Mode::Shapes, Mode::Entry, Mode::EntryCont, Mode::Oracle];

    pub fn name(self) -> &'static str {
        match self {
            Mode::Baseline => "baseline",
            Mode::Intra => "intra",
            Mode::Shapes => "shapes",
            Mode::Entry => "entry",
            Mode::EntryCont => "entry+cont",
            Mode::Oracle => "oracle",
        }
    }

    /// Whether type contexts flow between blocks at all.
    pub fn propagates(self) -> bool {
        !matches!(self, Mode::Baseline | Mode::Oracle)
    }

    pub fn shapes(self) -> bool {
        matches!(self, Mode::Shapes | Mode::Entry | Mode::EntryCont)
    }

    pub fn entry_points(self) -> bool {
        matches!(self, Mode::Entry | Mode::EntryCont)
    }

    pub fn continuations(self) -> bool {
        self == Mode::EntryCont
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Mode {
    type Err = String;

    fn from_str(s: &str) -> Result<Mode, String> {
        Mode::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| format!("unknown mode `{s}` (expected one of baseline, intra, shapes, entry, entry+cont, oracle)"))
    }
}

#[derive(Debug, Clone)]
pub struct Limits {
    pub maxvers: usize,
    pub maxentries: usize,
    pub max_depth: usize,
    /// Executed instructions before the run is aborted.
    pub budget: u64,
}

impl Default for Limits {
    fn default() -> Self {
        Limits { maxvers: 5, maxentries: 5, max_depth: 10_000, budget: 2_000_000_000 }
    }
}

#[derive(Debug, Clone)]
pub struct Config {
    pub mode: Mode,
    pub limits: Limits,
    /// Check every context claim against the runtime values it describes.
    pub validate: bool,
    /// Keep argument shapes in entry point contexts.
    pub entry_shapes: bool,
    pub clock: Clock,
}

impl Config {
    pub fn new(mode: Mode) -> Config {
        Config { mode, limits: Limits::default(), validate: false, entry_shapes: false, clock: Clock::real() }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ExecError {
    #[error("{0}")]
    Halt(#[from] HaltKind),
    #[error("internal error: {0}")]
    Internal(String),
    #[error("determinism violation: tag test {site} was recorded as always {recorded} but went {observed}")]
    DeterminismViolation { site: SiteId, recorded: bool, observed: bool },
}

pub type VersionId = usize;
pub type ContId = usize;

/// Memorized return tag of a function.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReturnState {
    Unseen,
    Known(TypeTag),
    Unknown,
}

#[derive(Debug)]
struct Link {
    block: BlockId,
    ctx: TypeContext,
    target: Cell<Option<VersionId>>,
}

impl Link {
    fn new(block: BlockId, ctx: TypeContext) -> Link {
        Link { block, ctx, target: Cell::new(None) }
    }
}

#[derive(Debug)]
enum Op {
    Inst(Inst),
    ReadSlot { dst: Reg, obj: Reg, slot: usize },
    /// Slot store whose shape transition was resolved at compile time.
    WriteSlot { obj: Reg, slot: usize, val: Reg, to: ShapeId },
    WriteDyn { obj: Reg, name: Rc<str>, val: Reg },
}

#[derive(Debug)]
enum Term {
    Goto(Link),
    Branch { cond: Reg, t: Link, f: Link },
    TagTest { site: SiteId, value: Reg, kind: TagKind, t: Link, f: Link },
    /// `refine`: specialize the hit arm on the shape the cache slot holds.
    ShapeTest { site: SiteId, value: Reg, cache: CacheId, refine: bool, t: Link, f: Link },
    Overflow { op: ArithOp, dst: Reg, a: Reg, b: Reg, ok: Link, ovf: Link },
    Call { callee: Reg, this: Reg, args: Vec<Reg>, cont: ContId, known: bool, entry: Option<Link> },
    Return { value: Reg },
    Throw { value: Reg },
    Halt(HaltKind),
}

#[derive(Debug)]
struct Code {
    ops: Vec<Op>,
    term: Term,
}

#[derive(Debug)]
struct Version {
    func: FuncId,
    block: BlockId,
    ctx: TypeContext,
    generic: bool,
    code: Option<Rc<Code>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum ContState {
    Stub,
    Compiled { assumed: TypeTag, version: VersionId },
    Invalidated,
}

#[derive(Debug)]
struct ContRecord {
    func: FuncId,
    block: BlockId,
    /// Caller context at the call, without the result register.
    base: TypeContext,
    dst: Reg,
    callee: Option<FuncId>,
    state: ContState,
}

#[derive(Debug, Default)]
struct BlockInfo {
    versions: Vec<VersionId>,
    specialized: usize,
    generic: Option<VersionId>,
    /// Distinct non-empty contexts ever requested.
    distinct: HashSet<ContextKey>,
}

#[derive(Debug)]
struct FuncState {
    live: Liveness,
    table: HashMap<(BlockId, ContextKey), VersionId>,
    blocks: Vec<BlockInfo>,
    ret: ReturnState,
    dependents: Vec<ContId>,
    caused_invalidation: bool,
    caches: Vec<Option<ShapeId>>,
}

#[derive(Debug)]
struct Frame {
    regs: Vec<Value>,
    ret: Option<ContId>,
}

#[derive(Debug, Default)]
struct Counters {
    dyn_tag_tests: u64,
    dyn_shape_tests: u64,
    static_tests_eliminated: u64,
    overflow_checks: u64,
    continuations_compiled: u64,
    continuations_invalidated: u64,
    functions_causing_invalidation: u64,
    shape_invalidations: u64,
    known_callee_calls: u64,
    total_calls: u64,
    return_tag_known_dynamic: u64,
    total_returns: u64,
    emitted_instr_count: u64,
    compile_events: u64,
    dyn_instructions: u64,
    unseen_return_continuations: u64,
    validated_entries: u64,
}

/// One VM instance: module, heap, compiled versions and counters.
pub struct Vm<'m> {
    module: &'m Module,
    cfg: Config,
    funcs: Vec<FuncState>,
    versions: Vec<Version>,
    conts: Vec<ContRecord>,
    shape_deps: HashMap<ShapeId, Vec<ContId>>,
    heap: Heap,
    globals: Vec<Value>,
    global_init: Vec<bool>,
    frames: Vec<Frame>,
    output: String,
    n: Counters,
    tallies: BTreeMap<SiteId, (u64, u64)>,
    /// Oracle replay: sites whose outcome was constant, with that outcome.
    free_sites: Option<HashMap<SiteId, bool>>,
}

impl<'m> Vm<'m> {
    pub fn new(module: &'m Module, cfg: Config) -> Vm<'m> {
        let funcs = module
            .functions
            .iter()
            .map(|f| FuncState {
                live: Liveness::compute(f),
                table: HashMap::new(),
                blocks: f.blocks.iter().map(|_| BlockInfo::default()).collect(),
                ret: ReturnState::Unseen,
                dependents: Vec::new(),
                caused_invalidation: false,
                caches: vec![None; f.cache_count as usize],
            })
            .collect();
        Vm {
            module,
            cfg,
            funcs,
            versions: Vec::new(),
            conts: Vec::new(),
            shape_deps: HashMap::new(),
            heap: Heap::new(),
            globals: vec![Value::Undefined; module.globals.len()],
            global_init: vec![false; module.globals.len()],
            frames: Vec::new(),
            output: String::new(),
            n: Counters::default(),
            tallies: BTreeMap::new(),
            free_sites: None,
        }
    }

    /// Replays with the given constant-outcome tag-test sites executed for free.
    pub(crate) fn set_free_sites(&mut self, sites: HashMap<SiteId, bool>) {
        self.free_sites = Some(sites);
    }

    pub fn mode(&self) -> Mode {
        self.cfg.mode
    }

    pub fn module(&self) -> &Module {
        self.module
    }

    pub fn heap(&self) -> &Heap {
        &self.heap
    }

    /// Everything `print` wrote so far.
    pub fn output(&self) -> &str {
        &self.output
    }

    pub fn take_output(&mut self) -> String {
        std::mem::take(&mut self.output)
    }

    pub fn return_state(&self, f: FuncId) -> ReturnState {
        self.funcs[f.0 as usize].ret
    }

    /// Runs the top-level code.
    pub fn run_main(&mut self) -> Result<(), ExecError> {
        let main = FuncId(0);
        self.invoke(main, Value::Undefined, Vec::new()).map(|_| ())
    }

    /// Calls the function stored in global `name` with no arguments.
    pub fn call_global(&mut self, name: &str) -> Result<Option<Value>, ExecError> {
        let Some(g) = self.module.global_id(name) else { return Ok(None) };
        match self.globals[g.0 as usize] {
            Value::Closure(f) => self.invoke(f, Value::Undefined, Vec::new()).map(Some),
            _ => Ok(None),
        }
    }

    /// Calls `f` from outside any compiled code, through its generic entry.
    pub fn invoke(&mut self, f: FuncId, this: Value, args: Vec<Value>) -> Result<Value, ExecError> {
        let base = self.frames.len();
        self.push_frame(f, this, args, None)?;
        let entry = self.module.function(f).entry;
        let v = self.request_version(f, entry, TypeContext::new());
        let r = self.execute(v);
        if r.is_err() {
            self.frames.truncate(base);
        }
        r
    }

    fn push_frame(&mut self, f: FuncId, this: Value, args: Vec<Value>, ret: Option<ContId>) -> Result<(), ExecError> {
        if self.frames.len() >= self.cfg.limits.max_depth {
            return Err(HaltKind::StackOverflow.into());
        }
        let ir = self.module.function(f);
        let mut regs = vec![Value::Undefined; ir.reg_count as usize];
        regs[0] = this;
        for (i, a) in args.into_iter().take(ir.param_count as usize).enumerate() {
            regs[i + 1] = a;
        }
        self.frames.push(Frame { regs, ret });
        Ok(())
    }

    // ----- versions ---------------------------------------------------------

    fn request_version(&mut self, f: FuncId, block: BlockId, ctx: TypeContext) -> VersionId {
        let fs = &mut self.funcs[f.0 as usize];
        let ctx = if self.cfg.mode.propagates() { ctx.restricted(fs.live.live_in(block)) } else { TypeContext::new() };
        let key = ctx.key();
        if let Some(&v) = fs.table.get(&(block, key.clone())) {
            return v;
        }
        let is_entry = block == self.module.function(f).entry;
        let cap = if is_entry { self.cfg.limits.maxentries } else { self.cfg.limits.maxvers };
        let info = &mut fs.blocks[block.0 as usize];
        if !ctx.is_empty() {
            info.distinct.insert(key.clone());
        }
        let generic = ctx.is_empty() || info.specialized >= cap;
        let vid = if generic {
            match info.generic {
                Some(g) => g,
                None => {
                    let g = self.versions.len();
                    self.versions.push(Version { func: f, block, ctx: TypeContext::new(), generic: true, code: None });
                    info.generic = Some(g);
                    info.versions.push(g);
                    fs.table.insert((block, TypeContext::new().key()), g);
                    g
                }
            }
        } else {
            let v = self.versions.len();
            self.versions.push(Version { func: f, block, ctx, generic: false, code: None });
            info.specialized += 1;
            info.versions.push(v);
            v
        };
        fs.table.insert((block, key), vid);
        vid
    }

    fn resolve(&mut self, f: FuncId, link: &Link, extra: Option<(Reg, ShapeId)>) -> VersionId {
        if let Some(v) = link.target.get() {
            return v;
        }
        let v = match extra {
            Some((r, s)) => {
                let mut ctx = link.ctx.clone();
                ctx.set(r, TypeTag::Object, Some(s));
                self.request_version(f, link.block, ctx)
            }
            None => self.request_version(f, link.block, link.ctx.clone()),
        };
        link.target.set(Some(v));
        v
    }

    fn code(&mut self, v: VersionId) -> Result<Rc<Code>, ExecError> {
        if let Some(c) = &self.versions[v].code {
            return Ok(c.clone());
        }
        let c = Rc::new(self.compile(v)?);
        self.versions[v].code = Some(c.clone());
        Ok(c)
    }

    // ----- return tags and continuations -------------------------------------

    /// Called when a `Return` is compiled.
    fn record_return_type(&mut self, f: FuncId, tag: TypeTag) {
        let fs = &mut self.funcs[f.0 as usize];
        let next = match fs.ret {
            ReturnState::Unseen if tag == TypeTag::Unknown => ReturnState::Unknown,
            ReturnState::Unseen => ReturnState::Known(tag),
            ReturnState::Known(t) if t == tag => return,
            ReturnState::Known(_) => ReturnState::Unknown,
            ReturnState::Unknown => return,
        };
        fs.ret = next;
        if next == ReturnState::Unknown {
            self.invalidate_continuations(f);
        }
    }

    fn invalidate_continuations(&mut self, f: FuncId) {
        let deps = std::mem::take(&mut self.funcs[f.0 as usize].dependents);
        let mut any = false;
        for c in deps {
            if matches!(self.conts[c].state, ContState::Compiled { .. }) {
                self.conts[c].state = ContState::Invalidated;
                self.n.continuations_invalidated += 1;
                any = true;
            }
        }
        let fs = &mut self.funcs[f.0 as usize];
        if any && !fs.caused_invalidation {
            fs.caused_invalidation = true;
            self.n.functions_causing_invalidation += 1;
        }
    }

    fn shape_destabilized(&mut self, s: ShapeId) {
        for c in self.shape_deps.remove(&s).unwrap_or_default() {
            if matches!(self.conts[c].state, ContState::Compiled { .. }) {
                self.conts[c].state = ContState::Invalidated;
                self.n.shape_invalidations += 1;
            }
        }
    }

    /// Version to resume at when a call returns to continuation `c`.
    fn continuation(&mut self, c: ContId) -> (VersionId, TypeTag) {
        if let ContState::Compiled { assumed, version } = self.conts[c].state {
            return (version, assumed);
        }
        let mode = self.cfg.mode;
        let mut ctx = self.conts[c].base.clone();
        if mode.shapes() {
            let heap = &self.heap;
            ctx.drop_shapes_where(|_, s| heap.is_unstable(s));
            let kept: Vec<ShapeId> = ctx.iter().filter_map(|(_, k)| k.shape).collect();
            for s in kept {
                let deps = self.shape_deps.entry(s).or_default();
                if !deps.contains(&c) {
                    deps.push(c);
                }
            }
        }
        let mut assumed = TypeTag::Unknown;
        if mode.continuations() {
            if let Some(g) = self.conts[c].callee {
                match self.funcs[g.0 as usize].ret {
                    ReturnState::Known(t) => {
                        assumed = t;
                        self.funcs[g.0 as usize].dependents.push(c);
                    }
                    ReturnState::Unseen => self.n.unseen_return_continuations += 1,
                    ReturnState::Unknown => {}
                }
            }
        }
        let rec = &self.conts[c];
        if assumed != TypeTag::Unknown {
            ctx.set(rec.dst, assumed, None);
        }
        let (f, block) = (rec.func, rec.block);
        let v = self.request_version(f, block, ctx);
        self.conts[c].state = ContState::Compiled { assumed, version: v };
        self.n.continuations_compiled += 1;
        self.n.compile_events += 1;
        (v, assumed)
    }

    // ----- execution ----------------------------------------------------------

    fn frame(&mut self) -> &mut Frame {
        self.frames.last_mut().expect("active frame")
    }

    fn get(&self, r: Reg) -> &Value {
        &self.frames.last().expect("active frame").regs[r.0 as usize]
    }

    fn set(&mut self, r: Reg, v: Value) {
        self.frame().regs[r.0 as usize] = v;
    }

    fn object(&self, r: Reg) -> Result<u32, ExecError> {
        match self.get(r) {
            Value::Object(o) => Ok(*o),
            other => Err(ExecError::Internal(format!("expected an object in {r}, found {other:?}"))),
        }
    }

    fn int(&self, r: Reg) -> Result<i32, ExecError> {
        match self.get(r) {
            Value::Int(n) => Ok(*n),
            other => Err(ExecError::Internal(format!("expected an int32 in {r}, found {other:?}"))),
        }
    }

    fn num(&self, r: Reg) -> Result<f64, ExecError> {
        self.get(r).as_f64().ok_or_else(|| ExecError::Internal(format!("expected a number in {r}")))
    }

    fn str(&self, r: Reg) -> Result<Rc<str>, ExecError> {
        match self.get(r) {
            Value::Str(s) => Ok(s.clone()),
            other => Err(ExecError::Internal(format!("expected a string in {r}, found {other:?}"))),
        }
    }

    fn tick(&mut self) -> Result<(), ExecError> {
        self.n.dyn_instructions += 1;
        if self.n.dyn_instructions > self.cfg.limits.budget {
            return Err(HaltKind::BudgetExceeded.into());
        }
        Ok(())
    }

    fn validate(&self, v: VersionId) -> Result<(), ExecError> {
        let ver = &self.versions[v];
        for (r, k) in ver.ctx.iter() {
            let val = self.get(r);
            if !k.tag.admits(val.tag()) {
                return Err(ExecError::Internal(format!(
                    "context mismatch entering {} {} of {}: {r} claimed {} but holds {}",
                    if ver.generic { "generic" } else { "version" },
                    ver.block,
                    self.module.function(ver.func).name,
                    k.tag,
                    val.tag()
                )));
            }
            if let Some(s) = k.shape {
                let actual = match val {
                    Value::Object(o) => Some(self.heap.shape_of(*o)),
                    _ => None,
                };
                if actual != Some(s) {
                    return Err(ExecError::Internal(format!(
                        "shape mismatch entering {} of {}: {r} claimed {s}, actual {actual:?}",
                        ver.block,
                        self.module.function(ver.func).name
                    )));
                }
            }
        }
        Ok(())
    }

    /// Runs from version `v` until the frame it belongs to returns to an
    /// external caller.
    fn execute(&mut self, mut v: VersionId) -> Result<Value, ExecError> {
        loop {
            let code = self.code(v)?;
            if self.cfg.validate {
                self.validate(v)?;
                self.n.validated_entries += 1;
            }
            for op in &code.ops {
                self.tick()?;
                self.exec_op(op)?;
            }
            self.tick()?;
            let f = self.versions[v].func;
            v = match &code.term {
                Term::Goto(l) => self.resolve(f, l, None),
                Term::Branch { cond, t, f: fl } => {
                    let taken = self.get(*cond).truthy();
                    self.resolve(f, if taken { t } else { fl }, None)
                }
                Term::TagTest { site, value, kind, t, f: fl } => {
                    let outcome = self.get(*value).kind() == *kind;
                    self.count_tag_test(*site, outcome)?;
                    self.resolve(f, if outcome { t } else { fl }, None)
                }
                Term::ShapeTest { value, cache, refine, t, f: fl, .. } => {
                    self.n.dyn_shape_tests += 1;
                    let o = self.object(*value)?;
                    let s = self.heap.shape_of(o);
                    let slot = &mut self.funcs[f.0 as usize].caches[cache.0 as usize];
                    let hit = *slot.get_or_insert(s) == s;
                    if hit {
                        self.resolve(f, t, refine.then_some((*value, s)))
                    } else {
                        self.resolve(f, fl, None)
                    }
                }
                Term::Overflow { op, dst, a, b, ok, ovf } => {
                    self.n.overflow_checks += 1;
                    match runtime::int_arith(*op, self.int(*a)?, self.int(*b)?) {
                        Some(r) => {
                            self.set(*dst, Value::Int(r));
                            self.resolve(f, ok, None)
                        }
                        None => self.resolve(f, ovf, None),
                    }
                }
                Term::Call { callee, this, args, cont, known, entry } => {
                    self.n.total_calls += 1;
                    if *known {
                        self.n.known_callee_calls += 1;
                    }
                    let g = match self.get(*callee) {
                        Value::Closure(g) => *g,
                        _ => return Err(HaltKind::NotCallable.into()),
                    };
                    let this = self.get(*this).clone();
                    let argv: Vec<Value> = args.iter().map(|a| self.get(*a).clone()).collect();
                    self.push_frame(g, this, argv, Some(*cont))?;
                    match entry {
                        Some(l) => self.resolve(g, l, None),
                        None => {
                            let e = self.module.function(g).entry;
                            self.request_version(g, e, TypeContext::new())
                        }
                    }
                }
                Term::Return { value } => {
                    let val = self.get(*value).clone();
                    let frame = self.frames.pop().expect("returning frame");
                    let Some(c) = frame.ret else { return Ok(val) };
                    let (next, assumed) = self.continuation(c);
                    self.n.total_returns += 1;
                    if assumed != TypeTag::Unknown {
                        self.n.return_tag_known_dynamic += 1;
                    }
                    let dst = self.conts[c].dst;
                    self.set(dst, val);
                    next
                }
                Term::Throw { value } => {
                    let msg = self.heap.display(self.get(*value));
                    return Err(HaltKind::Thrown(msg).into());
                }
                Term::Halt(h) => return Err(h.clone().into()),
            };
        }
    }

    fn count_tag_test(&mut self, site: SiteId, outcome: bool) -> Result<(), ExecError> {
        if let Some(free) = &self.free_sites {
            if let Some(&recorded) = free.get(&site) {
                if recorded != outcome {
                    return Err(ExecError::DeterminismViolation { site, recorded, observed: outcome });
                }
                return Ok(());
            }
        }
        self.n.dyn_tag_tests += 1;
        let t = self.tallies.entry(site).or_default();
        if outcome {
            t.0 += 1;
        } else {
            t.1 += 1;
        }
        Ok(())
    }

    fn exec_op(&mut self, op: &Op) -> Result<(), ExecError> {
        match op {
            Op::Inst(i) => self.exec_inst(i),
            Op::ReadSlot { dst, obj, slot } => {
                let o = self.object(*obj)?;
                let v = self.heap.read_slot(o, *slot);
                self.set(*dst, v);
                Ok(())
            }
            Op::WriteSlot { obj, slot, val, to } => {
                let o = self.object(*obj)?;
                let v = self.get(*val).clone();
                if let Some(s) = self.heap.write_slot(o, *slot, v, *to) {
                    self.shape_destabilized(s);
                }
                Ok(())
            }
            Op::WriteDyn { obj, name, val } => {
                let o = self.object(*obj)?;
                let v = self.get(*val).clone();
                if let Some(s) = self.heap.set_prop(o, name, v) {
                    self.shape_destabilized(s);
                }
                Ok(())
            }
        }
    }

    fn exec_inst(&mut self, inst: &Inst) -> Result<(), ExecError> {
        use Inst::*;
        let v = match inst {
            Const { dst, val } => {
                let v = runtime::const_value(val);
                self.set(*dst, v);
                return Ok(());
            }
            MakeClosure { func, .. } => Value::Closure(*func),
            Move { src, .. } => self.get(*src).clone(),
            I32ToF64 { src, .. } => Value::Float(self.num(*src)?),
            IntMod { a, b, .. } => Value::Int(runtime::int_mod(self.int(*a)?, self.int(*b)?)?),
            FloatArith { op, a, b, .. } => Value::Float(runtime::float_arith(*op, self.num(*a)?, self.num(*b)?)),
            FloatNeg { src, .. } => Value::Float(-self.num(*src)?),
            CmpI32 { op, a, b, .. } => Value::Bool(runtime::compare(*op, self.int(*a)?, self.int(*b)?)),
            CmpF64 { op, a, b, .. } => Value::Bool(runtime::compare(*op, self.num(*a)?, self.num(*b)?)),
            StrConcat { a, b, .. } => {
                let (a, b) = (self.str(*a)?, self.str(*b)?);
                let mut s = String::with_capacity(a.len() + b.len());
                s.push_str(&a);
                s.push_str(&b);
                Value::Str(s.into())
            }
            StrEq { a, b, .. } => Value::Bool(self.str(*a)? == self.str(*b)?),
            RefEq { a, b, .. } => Value::Bool(runtime::strict_equals(self.get(*a), self.get(*b))),
            Not { src, .. } => Value::Bool(!self.get(*src).truthy()),
            ConstTruthy { src, .. } | IntTruthy { src, .. } | FloatTruthy { src, .. } | StrNonEmpty { src, .. } => {
                Value::Bool(self.get(*src).truthy())
            }
            AllocObject { .. } => self.heap.alloc_object(),
            AllocArray { elems, .. } => {
                let items = elems.iter().map(|r| self.get(*r).clone()).collect();
                self.heap.alloc_array(items)
            }
            ReadProp { obj, name, .. } | GetPropGeneric { obj, name, .. } => {
                let o = self.object(*obj)?;
                self.heap.get_prop(o, name)
            }
            WriteProp { obj, name, val, .. } | InitProp { obj, name, val } | SetPropGeneric { obj, name, val } => {
                let o = self.object(*obj)?;
                let v = self.get(*val).clone();
                if let Some(s) = self.heap.set_prop(o, name, v) {
                    self.shape_destabilized(s);
                }
                return Ok(());
            }
            ArrayLen { arr, .. } => match self.get(*arr) {
                Value::Array(a) => Value::Int(self.heap.array(*a).len() as i32),
                _ => return Err(ExecError::Internal("array_len on a non-array".into())),
            },
            StrLen { src, .. } => Value::Int(runtime::str_len(&self.str(*src)?)),
            ArrayRead { arr, idx, .. } => match self.get(*arr) {
                Value::Array(a) => self.heap.array_get(*a, self.int(*idx)?),
                _ => return Err(ExecError::Internal("array read on a non-array".into())),
            },
            ArrayWrite { arr, idx, val } => {
                let a = match self.get(*arr) {
                    Value::Array(a) => *a,
                    _ => return Err(ExecError::Internal("array write on a non-array".into())),
                };
                let i = self.int(*idx)?;
                let v = self.get(*val).clone();
                self.heap.array_set(a, i, v)?;
                return Ok(());
            }
            GetGlobal { global, .. } => self.globals[global.0 as usize].clone(),
            SetGlobal { global, src } => {
                let GlobalId(g) = *global;
                self.globals[g as usize] = self.get(*src).clone();
                self.global_init[g as usize] = true;
                return Ok(());
            }
            Builtin { which, args, .. } => {
                let vals: Vec<Value> = args.iter().map(|r| self.get(*r).clone()).collect();
                runtime::call_builtin(*which, &vals, &self.heap, &mut self.cfg.clock, &mut self.output)
            }
            other => return Err(ExecError::Internal(format!("terminator in block body: {other}"))),
        };
        let dst = inst.def().expect("value-producing instruction");
        self.set(dst, v);
        Ok(())
    }

    // ----- statistics -----------------------------------------------------------

    pub fn stats(&self, program: &str) -> StatsReport {
        let mut versions_per_block = BTreeMap::new();
        let mut entry_points_per_function = BTreeMap::new();
        for (fi, fs) in self.funcs.iter().enumerate() {
            let entry = self.module.functions[fi].entry;
            for (bi, b) in fs.blocks.iter().enumerate() {
                if b.versions.is_empty() {
                    continue;
                }
                let n = b.versions.len() as u32;
                *versions_per_block.entry(n).or_insert(0) += 1;
                if BlockId(bi as u32) == entry {
                    *entry_points_per_function.entry(n).or_insert(0) += 1;
                }
            }
        }
        let n = &self.n;
        StatsReport {
            schema_version: SCHEMA_VERSION,
            program: program.to_string(),
            mode: self.cfg.mode.name().to_string(),
            dyn_tag_tests: n.dyn_tag_tests,
            dyn_shape_tests: n.dyn_shape_tests,
            static_tests_eliminated: n.static_tests_eliminated,
            overflow_checks: n.overflow_checks,
            versions_per_block,
            entry_points_per_function,
            continuations_compiled: n.continuations_compiled,
            continuations_invalidated: n.continuations_invalidated,
            functions_causing_invalidation: n.functions_causing_invalidation,
            shape_invalidations: n.shape_invalidations,
            known_callee_calls: n.known_callee_calls,
            total_calls: n.total_calls,
            return_tag_known_dynamic: n.return_tag_known_dynamic,
            total_returns: n.total_returns,
            emitted_instr_count: n.emitted_instr_count,
            compile_events: n.compile_events,
            dyn_instructions: n.dyn_instructions,
            unseen_return_continuations: n.unseen_return_continuations,
            oracle_recorded_tag_tests: None,
            oracle_removed_sites: None,
            tag_test_sites: self
                .tallies
                .iter()
                .map(|(s, (t, f))| SiteTally { site: s.to_string(), executed: t + f, taken_true: *t, taken_false: *f })
                .collect(),
        }
    }

    /// Per-site `(true, false)` outcome counts of counted tag tests.
    pub fn site_outcomes(&self) -> &BTreeMap<SiteId, (u64, u64)> {
        &self.tallies
    }

    /// Version and continuation entries checked against runtime values.
    pub fn validated_entries(&self) -> u64 {
        self.n.validated_entries
    }
}
