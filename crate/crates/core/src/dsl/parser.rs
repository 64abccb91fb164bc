//! Recursive-descent parser for `.meq` equilibrium and `.mpl` plan documents.

use std::collections::{BTreeMap, BTreeSet};

use crate::ids::{ContractId, ServiceId, SourceId, SubunitId, UnitId};
use crate::model::{
    AdvantageFlags, Consumer, Contract, ContractKind, CostCategory, Costs, EntityKind, MoneyEdge,
    ServiceEdge, Source, SourcingEquilibrium, Subunit, TitleRecord, Unit,
};
use crate::plan::{step_introductions, step_references, Guard, GuardedStep, Plan, Thread};
use crate::scale::{Polarity, SourceType, TitleScale};
use crate::transform::{Bindings, Step, SubunitRef, TransformationScope};
use crate::validate::validate_equilibrium;

use super::lexer::{tokenize, Token, TokenKind};
use super::{Diagnostic, Severity};

pub const KEYWORDS: &[&str] = &[
    "abandon",
    "acquire",
    "amount",
    "between",
    "contract",
    "contract-present",
    "cost",
    "counterparty",
    "covers",
    "create-subunit",
    "create-unit",
    "critical",
    "dissolve-subunit",
    "dissolve-unit",
    "equilibrium",
    "exists",
    "expires",
    "external",
    "flags",
    "from",
    "holder",
    "identity",
    "in",
    "kind",
    "level",
    "levels",
    "money",
    "move-service",
    "name",
    "pay",
    "plan",
    "positive",
    "retitle",
    "scale",
    "scope",
    "service",
    "sign",
    "source",
    "sources",
    "subunit",
    "terminate",
    "third-party",
    "thread",
    "time",
    "title-at",
    "to",
    "transfer",
    "unit",
    "volume",
    "when",
];

pub fn is_keyword(word: &str) -> bool {
    KEYWORDS.binary_search(&word).is_ok()
}

type PResult<T> = Result<T, Diagnostic>;

struct Parser<'a> {
    toks: &'a [Token],
    pos: usize,
}

/// Title and source options after `level <n>` or after the type.
#[derive(Default)]
struct SourceOptions {
    bindings: Bindings,
    critical: Option<Option<UnitId>>,
    flags: AdvantageFlags,
    costs: Costs,
    first_binding: Option<Token>,
}

impl<'a> Parser<'a> {
    fn new(toks: &'a [Token]) -> Self {
        Self { toks, pos: 0 }
    }

    fn peek(&self) -> &Token {
        &self.toks[self.pos.min(self.toks.len() - 1)]
    }

    fn peek_at(&self, k: usize) -> &Token {
        &self.toks[(self.pos + k).min(self.toks.len() - 1)]
    }

    fn bump(&mut self) -> Token {
        let t = self.peek().clone();
        if t.kind != TokenKind::Eof {
            self.pos += 1;
        }
        t
    }

    fn at_end(&self) -> bool {
        self.peek().kind == TokenKind::Eof
    }

    fn error(tok: &Token, message: impl Into<String>) -> Diagnostic {
        Diagnostic {
            line: tok.line,
            column: tok.column,
            severity: Severity::Error,
            message: message.into(),
            token: tok.text.clone(),
        }
    }

    fn describe(tok: &Token) -> String {
        match tok.kind {
            TokenKind::Eof => "end of input".to_owned(),
            _ => format!("`{}`", tok.text),
        }
    }

    fn expect_word(&mut self, w: &str) -> PResult<Token> {
        if self.peek().is_word(w) {
            Ok(self.bump())
        } else {
            Err(Self::error(
                self.peek(),
                format!("expected `{w}`, found {}", Self::describe(self.peek())),
            ))
        }
    }

    fn eat_word(&mut self, w: &str) -> bool {
        if self.peek().is_word(w) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expect_punct(&mut self, c: char) -> PResult<Token> {
        if self.peek().is_punct(c) {
            Ok(self.bump())
        } else {
            Err(Self::error(
                self.peek(),
                format!("expected `{c}`, found {}", Self::describe(self.peek())),
            ))
        }
    }

    fn eat_punct(&mut self, c: char) -> bool {
        if self.peek().is_punct(c) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    /// An identifier that is not a reserved word.
    fn ident(&mut self, what: &str) -> PResult<(String, Token)> {
        let tok = self.peek().clone();
        match &tok.kind {
            TokenKind::Ident(s) if is_keyword(s) => Err(Self::error(
                &tok,
                format!("`{s}` is a reserved word and cannot name a {what}"),
            )),
            TokenKind::Ident(s) => {
                self.pos += 1;
                Ok((s.clone(), tok))
            }
            _ => Err(Self::error(
                &tok,
                format!("expected {what} name, found {}", Self::describe(&tok)),
            )),
        }
    }

    /// Any identifier-shaped word, reserved or not.
    fn word(&mut self, what: &str) -> PResult<(String, Token)> {
        let tok = self.peek().clone();
        match &tok.kind {
            TokenKind::Ident(s) => {
                self.pos += 1;
                Ok((s.clone(), tok))
            }
            _ => Err(Self::error(
                &tok,
                format!("expected {what}, found {}", Self::describe(&tok)),
            )),
        }
    }

    fn integer(&mut self, what: &str) -> PResult<(u64, Token)> {
        let tok = self.peek().clone();
        match &tok.kind {
            TokenKind::Number(s) if !s.contains('.') => {
                let v = s
                    .parse::<u64>()
                    .map_err(|_| Self::error(&tok, format!("{what} {s} is too large")))?;
                self.pos += 1;
                Ok((v, tok))
            }
            _ => Err(Self::error(
                &tok,
                format!(
                    "expected {what} (an integer), found {}",
                    Self::describe(&tok)
                ),
            )),
        }
    }

    fn level(&mut self) -> PResult<(u32, Token)> {
        let (v, tok) = self.integer("level")?;
        let v =
            u32::try_from(v).map_err(|_| Self::error(&tok, format!("level {v} is too large")))?;
        Ok((v, tok))
    }

    fn real(&mut self, what: &str) -> PResult<(f64, Token)> {
        let tok = self.peek().clone();
        match &tok.kind {
            TokenKind::Number(s) => {
                let v = s
                    .parse::<f64>()
                    .map_err(|_| Self::error(&tok, format!("invalid {what} {s}")))?;
                self.pos += 1;
                Ok((v, tok))
            }
            _ => Err(Self::error(
                &tok,
                format!("expected {what}, found {}", Self::describe(&tok)),
            )),
        }
    }

    fn string(&mut self, what: &str) -> PResult<String> {
        let tok = self.peek().clone();
        match &tok.kind {
            TokenKind::Str(s) => {
                self.pos += 1;
                Ok(s.clone())
            }
            _ => Err(Self::error(
                &tok,
                format!("expected quoted {what}, found {}", Self::describe(&tok)),
            )),
        }
    }

    /// `<unit>.<subunit>`
    fn subunit_ref(&mut self) -> PResult<(SubunitRef, Token)> {
        let (unit, tok) = self.ident("unit")?;
        self.expect_punct('.')?;
        let (sub, _) = self.ident("subunit")?;
        Ok((SubunitRef::new(unit, sub), tok))
    }

    /// `<type> level <n>` with the level checked against `scale_len` when the
    /// type's scale is known.
    fn source_type(&mut self) -> PResult<(SourceType, Token)> {
        let (word, tok) = self.word("source type")?;
        Ok((SourceType::from(word), tok))
    }

    fn check_level(tok: &Token, level: u32, scale: Option<&TitleScale>) -> PResult<()> {
        if let Some(scale) = scale {
            if !scale.contains_level(level) {
                return Err(Self::error(
                    tok,
                    format!("level {level} out of range 1..{}", scale.len()),
                ));
            }
        }
        Ok(())
    }

    fn source_options(&mut self, allow_bindings: bool) -> PResult<SourceOptions> {
        let mut o = SourceOptions::default();
        loop {
            let tok = self.peek().clone();
            let slot = if tok.is_word("holder") {
                Some(&mut o.bindings.holder)
            } else if tok.is_word("counterparty") {
                Some(&mut o.bindings.counterparty)
            } else if tok.is_word("third-party") {
                Some(&mut o.bindings.third_party)
            } else {
                None
            };
            if let Some(slot) = slot {
                if !allow_bindings {
                    return Err(Self::error(
                        &tok,
                        format!("`{}` needs a titled source", tok.text),
                    ));
                }
                self.pos += 1;
                if slot.is_some() {
                    return Err(Self::error(&tok, format!("`{}` given twice", tok.text)));
                }
                let (u, _) = self.ident("unit")?;
                *slot = Some(UnitId::new(u));
                o.first_binding.get_or_insert(tok);
                continue;
            }
            if tok.is_word("critical") {
                self.pos += 1;
                if o.critical.is_some() {
                    return Err(Self::error(&tok, "`critical` given twice"));
                }
                let unit = match &self.peek().kind {
                    TokenKind::Ident(s) if !is_keyword(s) => Some(UnitId::new(self.bump().text)),
                    _ => None,
                };
                o.critical = Some(unit);
                continue;
            }
            if tok.is_word("flags") {
                self.pos += 1;
                loop {
                    let (f, ftok) = self.word("flag")?;
                    let slot = match f.as_str() {
                        "v" => &mut o.flags.valuable,
                        "r" => &mut o.flags.rare,
                        "i" => &mut o.flags.inimitable,
                        "n" => &mut o.flags.non_substitutable,
                        _ => {
                            return Err(Self::error(
                                &ftok,
                                format!("unknown flag `{f}`; expected v, r, i or n"),
                            ))
                        }
                    };
                    if *slot {
                        return Err(Self::error(&ftok, format!("flag `{f}` given twice")));
                    }
                    *slot = true;
                    if !self.eat_punct(',') {
                        break;
                    }
                }
                continue;
            }
            if tok.is_word("cost") {
                self.pos += 1;
                let mut any = false;
                while matches!(self.peek().kind, TokenKind::Ident(_))
                    && self.peek_at(1).is_punct('=')
                {
                    let (cat, ctok) = self.word("cost category")?;
                    let cat = CostCategory::from_keyword(&cat).ok_or_else(|| {
                        Self::error(&ctok, format!("unknown cost category `{cat}`"))
                    })?;
                    self.expect_punct('=')?;
                    let (amount, _) = self.real("amount")?;
                    *o.costs.slot(cat) = amount;
                    any = true;
                }
                if !any {
                    return Err(Self::error(
                        self.peek(),
                        "expected `<category>=<amount>` after `cost`",
                    ));
                }
                continue;
            }
            return Ok(o);
        }
    }

    fn bindings(&mut self) -> PResult<Bindings> {
        let o = self.source_options(true)?;
        if o.critical.is_some() || o.flags.any() || o.costs != Costs::default() {
            return Err(Self::error(
                self.peek_at(0),
                "only holder, counterparty and third-party may follow a retitle",
            ));
        }
        Ok(o.bindings)
    }

    fn contract_spec(&mut self) -> PResult<(Contract, Token)> {
        let (id, tok) = self.ident("contract")?;
        self.expect_word("kind")?;
        let (kind, ktok) = self.word("contract kind")?;
        let kind = ContractKind::from_keyword(&kind).ok_or_else(|| {
            Self::error(
                &ktok,
                format!("unknown contract kind `{kind}`; expected target-service-provision, reversibility-clause or other"),
            )
        })?;
        self.expect_word("between")?;
        let (a, _) = self.ident("unit")?;
        self.expect_punct(',')?;
        let (b, _) = self.ident("unit")?;
        let mut covered = BTreeSet::new();
        if self.eat_word("covers") {
            loop {
                let (s, stok) = self.ident("service")?;
                if !covered.insert(ServiceId::new(s.clone())) {
                    return Err(Self::error(&stok, format!("service {s} listed twice")));
                }
                if !self.eat_punct(',') {
                    break;
                }
            }
        }
        let expiry = if self.eat_word("expires") {
            Some(self.integer("expiry")?.0)
        } else {
            None
        };
        Ok((
            Contract {
                id: ContractId::new(id),
                kind,
                parties: (UnitId::new(a), UnitId::new(b)),
                covered_services: covered,
                expiry,
            },
            tok,
        ))
    }
}

// --- equilibrium documents -------------------------------------------------

struct EqBuilder {
    eq: SourcingEquilibrium,
    declared: BTreeSet<(EntityKind, String)>,
    diags: Vec<Diagnostic>,
}

impl EqBuilder {
    fn declare(&mut self, kind: EntityKind, id: &str, tok: &Token) -> bool {
        if !self.declared.insert((kind, id.to_owned())) {
            self.diags
                .push(Parser::error(tok, format!("duplicate {kind} {id}")));
            return false;
        }
        true
    }
}

/// Parses an equilibrium document. The result is well formed: findings of
/// structural validation are reported as diagnostics at the declaration they
/// concern.
pub fn parse_equilibrium(text: &str) -> Result<SourcingEquilibrium, Vec<Diagnostic>> {
    let (eq, findings) = parse_equilibrium_unchecked(text)?;
    if findings.is_empty() {
        Ok(eq)
    } else {
        Err(findings)
    }
}

/// Parses an equilibrium document without rejecting it for validation
/// findings. Syntax errors and duplicate declarations are still errors; the
/// findings come back as diagnostics next to the value.
pub fn parse_equilibrium_unchecked(
    text: &str,
) -> Result<(SourcingEquilibrium, Vec<Diagnostic>), Vec<Diagnostic>> {
    let toks = tokenize(text)?;
    let mut p = Parser::new(&toks);
    let mut b = EqBuilder {
        eq: SourcingEquilibrium::new(),
        declared: BTreeSet::new(),
        diags: Vec::new(),
    };
    let mut id_tokens: BTreeMap<(EntityKind, String), Token> = BTreeMap::new();
    if let Err(d) = parse_eq_items(&mut p, &mut b, &mut id_tokens) {
        b.diags.push(d);
        return Err(sorted(b.diags));
    }
    if !b.diags.is_empty() {
        return Err(sorted(b.diags));
    }
    let report = validate_equilibrium(&b.eq);
    let mut findings = Vec::new();
    for f in report.findings {
        let kind = if f.kind == EntityKind::Title {
            EntityKind::Source
        } else {
            f.kind
        };
        let tok = id_tokens.get(&(kind, f.id.clone()));
        let (line, column, token) = match tok {
            Some(t) => (t.line, t.column, t.text.clone()),
            None => (1, 1, String::new()),
        };
        findings.push(Diagnostic {
            line,
            column,
            severity: Severity::Error,
            message: f.message,
            token,
        });
    }
    Ok((b.eq, sorted(findings)))
}

fn sorted(mut d: Vec<Diagnostic>) -> Vec<Diagnostic> {
    d.sort_by_key(|x| (x.line, x.column));
    d
}

fn parse_eq_items(
    p: &mut Parser,
    b: &mut EqBuilder,
    id_tokens: &mut BTreeMap<(EntityKind, String), Token>,
) -> PResult<()> {
    while !p.at_end() {
        let tok = p.peek().clone();
        if p.eat_word("scale") {
            let (id, itok) = p.ident("scale")?;
            p.expect_word("levels")?;
            let (n, ntok) = p.integer("level count")?;
            p.expect_word("positive")?;
            let (k, _) = p.integer("positive count")?;
            let n = u32::try_from(n).map_err(|_| Parser::error(&ntok, "too many levels"))?;
            let k =
                u32::try_from(k).map_err(|_| Parser::error(&ntok, "too many positive levels"))?;
            if let Err(e) = b.eq.register_scale(TitleScale::custom(id, n, k)) {
                return Err(Parser::error(&itok, e.to_string()));
            }
        } else if p.eat_word("time") {
            b.eq.logical_time = p.integer("logical time")?.0;
        } else if p.eat_word("unit") {
            parse_unit(p, b, id_tokens)?;
        } else if p.eat_word("source") {
            let (id, itok) = p.ident("source")?;
            p.expect_punct(':')?;
            let (kind, ttok) = p.source_type()?;
            if b.eq.scale_of(&kind).is_none() {
                return Err(Parser::error(
                    &ttok,
                    format!("unknown source type `{kind}`"),
                ));
            }
            if p.peek().is_word("level") {
                return Err(Parser::error(
                    p.peek(),
                    "titled sources are declared inside their using subunit",
                ));
            }
            let o = p.source_options(false)?;
            let critical = match o.critical {
                Some(Some(u)) => Some(u),
                Some(None) => {
                    return Err(Parser::error(
                        &itok,
                        "name the unit after `critical` outside a subunit",
                    ))
                }
                None => None,
            };
            if b.declare(EntityKind::Source, &id, &itok) {
                id_tokens.insert((EntityKind::Source, id.clone()), itok);
                b.eq.sources.insert(
                    SourceId::new(id.clone()),
                    Source {
                        id: SourceId::new(id),
                        kind,
                        identity_critical_for: critical,
                        advantage: o.flags,
                        costs: o.costs,
                    },
                );
            }
        } else if p.eat_word("service") {
            let (id, itok) = p.ident("service")?;
            p.expect_word("from")?;
            let (from, ftok) = p.subunit_ref()?;
            check_membership(&b.eq, &from, &ftok)?;
            p.expect_word("to")?;
            let consumer = if p.eat_word("external") {
                Consumer::External
            } else {
                let (u, utok) = p.ident("unit")?;
                if p.eat_punct('.') {
                    let (s, _) = p.ident("subunit")?;
                    let r = SubunitRef::new(u, s);
                    check_membership(&b.eq, &r, &utok)?;
                    Consumer::Subunit(r.subunit)
                } else {
                    Consumer::Unit(UnitId::new(u))
                }
            };
            p.expect_word("volume")?;
            let (volume, _) = p.real("volume")?;
            let edge = ServiceEdge::new(id.clone(), from.subunit, consumer, volume);
            let key = edge.key();
            match b.eq.service_edges.entry(key) {
                std::collections::btree_map::Entry::Occupied(_) => {
                    b.diags
                        .push(Parser::error(&itok, format!("duplicate service edge {id}")));
                }
                std::collections::btree_map::Entry::Vacant(slot) => {
                    id_tokens.entry((EntityKind::Service, id)).or_insert(itok);
                    slot.insert(edge);
                }
            }
        } else if p.eat_word("money") {
            p.expect_word("from")?;
            let (payer, _) = p.ident("unit")?;
            p.expect_word("to")?;
            let (payee, _) = p.ident("unit")?;
            p.expect_word("amount")?;
            let (amount, _) = p.real("amount")?;
            let edge = MoneyEdge {
                payer: UnitId::new(payer.clone()),
                payee: UnitId::new(payee.clone()),
                amount,
            };
            let label = format!("{payer}->{payee}");
            if b.declare(EntityKind::Money, &label, &tok) {
                id_tokens.insert((EntityKind::Money, label), tok.clone());
                b.eq.money_edges.insert(edge.key(), edge);
            }
        } else if p.eat_word("contract") {
            let (c, ctok) = p.contract_spec()?;
            if b.declare(EntityKind::Contract, c.id.as_str(), &ctok) {
                id_tokens.insert((EntityKind::Contract, c.id.to_string()), ctok);
                b.eq.contracts.insert(c.id.clone(), c);
            }
        } else {
            return Err(Parser::error(
                &tok,
                format!(
                    "expected `unit`, `source`, `service`, `money`, `contract`, `scale` or `time`, found {}",
                    Parser::describe(&tok)
                ),
            ));
        }
    }
    Ok(())
}

fn check_membership(eq: &SourcingEquilibrium, r: &SubunitRef, tok: &Token) -> PResult<()> {
    match eq.subunits.get(&r.subunit) {
        Some(s) if s.unit == r.unit => Ok(()),
        Some(s) => Err(Parser::error(
            tok,
            format!(
                "subunit {} belongs to {}, not {}",
                r.subunit, s.unit, r.unit
            ),
        )),
        None => Err(Parser::error(
            tok,
            format!("unknown subunit {}.{}", r.unit, r.subunit),
        )),
    }
}

fn parse_unit(
    p: &mut Parser,
    b: &mut EqBuilder,
    id_tokens: &mut BTreeMap<(EntityKind, String), Token>,
) -> PResult<()> {
    let (id, itok) = p.ident("unit")?;
    let mut unit = Unit::new(id.clone());
    if p.eat_word("name") {
        p.expect_punct(':')?;
        unit.name = p.string("name")?;
    }
    if p.eat_word("identity") {
        p.expect_punct(':')?;
        unit.mission = p.string("identity")?;
    }
    let fresh = b.declare(EntityKind::Unit, &id, &itok);
    if fresh {
        id_tokens.insert((EntityKind::Unit, id.clone()), itok);
        b.eq.units.insert(unit.id.clone(), unit);
    }
    let unit_id = UnitId::new(id);
    p.expect_punct('{')?;
    while !p.eat_punct('}') {
        p.expect_word("subunit")?;
        let (sid, stok) = p.ident("subunit")?;
        let mut name = String::new();
        if p.eat_word("name") {
            p.expect_punct(':')?;
            name = p.string("name")?;
        }
        if b.declare(EntityKind::Subunit, &sid, &stok) {
            id_tokens.insert((EntityKind::Subunit, sid.clone()), stok);
            let sub_id = SubunitId::new(sid.clone());
            if fresh {
                if let Some(u) = b.eq.units.get_mut(&unit_id) {
                    u.subunits.insert(sub_id.clone());
                }
            }
            b.eq.subunits.insert(
                sub_id.clone(),
                Subunit {
                    id: sub_id,
                    unit: unit_id.clone(),
                    name,
                },
            );
        }
        p.expect_punct('{')?;
        while !p.eat_punct('}') {
            p.expect_word("source")?;
            parse_titled_source(p, b, id_tokens, &unit_id, &SubunitId::new(sid.clone()))?;
        }
    }
    Ok(())
}

fn parse_titled_source(
    p: &mut Parser,
    b: &mut EqBuilder,
    id_tokens: &mut BTreeMap<(EntityKind, String), Token>,
    unit: &UnitId,
    subunit: &SubunitId,
) -> PResult<()> {
    let (id, itok) = p.ident("source")?;
    p.expect_punct(':')?;
    let (kind, ttok) = p.source_type()?;
    let Some(scale) = b.eq.scale_of(&kind).cloned() else {
        return Err(Parser::error(
            &ttok,
            format!("unknown source type `{kind}`"),
        ));
    };
    p.expect_word("level")?;
    let (level, ltok) = p.level()?;
    Parser::check_level(&ltok, level, Some(&scale))?;
    let o = p.source_options(true)?;
    let (outsourcer, insourcer) = match scale.polarity_of_rank(level) {
        Polarity::Positive => (
            o.bindings.holder.clone().unwrap_or_else(|| unit.clone()),
            o.bindings.counterparty.clone(),
        ),
        Polarity::Negative => {
            let Some(h) = o.bindings.holder.clone() else {
                return Err(Parser::error(
                    &ltok,
                    format!(
                        "level {level} of {} is held from the insourcer side; name its `holder`",
                        scale.id
                    ),
                ));
            };
            (
                h,
                Some(
                    o.bindings
                        .counterparty
                        .clone()
                        .unwrap_or_else(|| unit.clone()),
                ),
            )
        }
    };
    let critical = o.critical.map(|c| c.unwrap_or_else(|| unit.clone()));
    if b.declare(EntityKind::Source, &id, &itok) {
        id_tokens.insert((EntityKind::Source, id.clone()), itok);
        let sid = SourceId::new(id);
        b.eq.sources.insert(
            sid.clone(),
            Source {
                id: sid.clone(),
                kind,
                identity_critical_for: critical,
                advantage: o.flags,
                costs: o.costs,
            },
        );
        b.eq.titles.insert(
            sid.clone(),
            TitleRecord {
                source: sid,
                level,
                outsourcer_side: outsourcer,
                insourcer_side: insourcer,
                third_party: o.bindings.third_party,
                using_subunit: subunit.clone(),
            },
        );
    }
    Ok(())
}

// --- plan documents ----------------------------------------------------------

struct ParsedPlan {
    plan: Plan,
    step_tokens: Vec<Vec<Token>>,
    scope_tokens: BTreeMap<&'static str, Token>,
}

pub fn parse_plan(text: &str) -> Result<Plan, Vec<Diagnostic>> {
    parse_plan_inner(text).map(|p| p.plan)
}

/// Parses a plan and resolves its references against `eq`: every entity a
/// step names must exist in `eq` or be introduced by some step of the plan,
/// and the scope must fit `eq`.
pub fn parse_plan_against(text: &str, eq: &SourcingEquilibrium) -> Result<Plan, Vec<Diagnostic>> {
    let parsed = parse_plan_inner(text)?;
    let diags = resolve(&parsed, eq);
    if diags.is_empty() {
        Ok(parsed.plan)
    } else {
        Err(sorted(diags))
    }
}

/// Reference check of an already parsed plan; diagnostics carry no position.
pub fn resolve_plan(plan: &Plan, eq: &SourcingEquilibrium) -> Vec<Diagnostic> {
    let blank = Token {
        kind: TokenKind::Eof,
        line: 0,
        column: 0,
        text: String::new(),
    };
    let parsed = ParsedPlan {
        plan: plan.clone(),
        step_tokens: plan
            .threads
            .iter()
            .map(|t| vec![blank.clone(); t.steps.len()])
            .collect(),
        scope_tokens: BTreeMap::new(),
    };
    resolve(&parsed, eq)
}

fn resolve(parsed: &ParsedPlan, eq: &SourcingEquilibrium) -> Vec<Diagnostic> {
    let plan = &parsed.plan;
    let mut diags = Vec::new();
    let introduced: BTreeSet<(EntityKind, String)> = plan
        .threads
        .iter()
        .flat_map(|t| t.steps.iter().flat_map(|g| step_introductions(&g.step)))
        .collect();
    let known = |kind: EntityKind, id: &str| -> bool {
        let present = match kind {
            EntityKind::Unit => eq.units.contains_key(id),
            EntityKind::Subunit => eq.subunits.contains_key(id),
            EntityKind::Source => eq.sources.contains_key(id),
            EntityKind::Service => eq.service_ids().contains(&ServiceId::new(id)),
            EntityKind::Contract => eq.contracts.contains_key(id),
            _ => true,
        };
        present || introduced.contains(&(kind, id.to_owned()))
    };
    for (t, toks) in plan.threads.iter().zip(&parsed.step_tokens) {
        for (g, tok) in t.steps.iter().zip(toks) {
            for (kind, id) in step_references(&g.step) {
                if !known(kind, &id) {
                    diags.push(Parser::error(tok, format!("unknown {kind} {id}")));
                }
            }
        }
    }
    if let Err(e) = plan.scope.check(eq, Some(&plan.concatenated())) {
        let tok = parsed.scope_tokens.get("scope");
        diags.push(Diagnostic {
            line: tok.map_or(0, |t| t.line),
            column: tok.map_or(0, |t| t.column),
            severity: Severity::Error,
            message: e.to_string(),
            token: tok.map(|t| t.text.clone()).unwrap_or_default(),
        });
    }
    diags
}

fn parse_plan_inner(text: &str) -> Result<ParsedPlan, Vec<Diagnostic>> {
    let toks = tokenize(text)?;
    let mut p = Parser::new(&toks);
    let mut diags = Vec::new();
    match plan_doc(&mut p, &mut diags) {
        Ok(parsed) if diags.is_empty() => Ok(parsed),
        Ok(_) => Err(sorted(diags)),
        Err(d) => {
            diags.push(d);
            Err(sorted(diags))
        }
    }
}

fn plan_doc(p: &mut Parser, diags: &mut Vec<Diagnostic>) -> PResult<ParsedPlan> {
    p.expect_word("plan")?;
    let (id, _) = p.ident("plan")?;
    let equilibrium = if p.eat_word("equilibrium") {
        Some(p.string("equilibrium file name")?)
    } else {
        None
    };
    let scope_tok = p.expect_word("scope")?;
    let mut scope_tokens = BTreeMap::new();
    scope_tokens.insert("scope", scope_tok.clone());
    let scope = plan_scope(p, &scope_tok)?;

    p.expect_punct('{')?;
    let mut threads: Vec<Thread> = Vec::new();
    let mut step_tokens = Vec::new();
    while !p.eat_punct('}') {
        let ttok = p.expect_word("thread")?;
        let (name, ntok) = p.ident("thread")?;
        if threads.iter().any(|t| t.name == name) {
            diags.push(Parser::error(&ntok, format!("duplicate thread {name}")));
        }
        p.expect_punct('{')?;
        let mut steps = Vec::new();
        let mut toks = Vec::new();
        while !p.eat_punct('}') {
            let start = p.peek().clone();
            let guard = if p.eat_word("when") {
                Some(guard(p)?)
            } else {
                None
            };
            let step_tok = p.peek().clone();
            let step = step(p)?;
            p.expect_punct(';')?;
            steps.push(GuardedStep { guard, step });
            toks.push(if start.is_word("when") {
                start
            } else {
                step_tok
            });
        }
        if steps.is_empty() {
            diags.push(Parser::error(&ttok, format!("thread {name} has no steps")));
        }
        threads.push(Thread { name, steps });
        step_tokens.push(toks);
    }
    if !p.at_end() {
        return Err(Parser::error(
            p.peek(),
            format!("unexpected {} after the plan", Parser::describe(p.peek())),
        ));
    }
    Ok(ParsedPlan {
        plan: Plan {
            id,
            equilibrium,
            scope,
            threads,
        },
        step_tokens,
        scope_tokens,
    })
}

fn plan_scope(p: &mut Parser, scope_tok: &Token) -> PResult<TransformationScope> {
    p.expect_punct('(')?;
    let mut roles: BTreeMap<String, String> = BTreeMap::new();
    let mut sources: Option<BTreeSet<SourceId>> = None;
    loop {
        let (role, rtok) = p.word("scope role")?;
        p.expect_punct('=')?;
        match role.as_str() {
            "A" | "B" | "X" | "Y" => {
                let (v, _) = p.ident("scope entry")?;
                if roles.insert(role.clone(), v).is_some() {
                    return Err(Parser::error(&rtok, format!("role {role} given twice")));
                }
            }
            "sources" => {
                if sources.is_some() {
                    return Err(Parser::error(&rtok, "sources given twice"));
                }
                let mut set = BTreeSet::new();
                if matches!(&p.peek().kind, TokenKind::Ident(_)) && !p.peek_at(1).is_punct('=') {
                    loop {
                        let (s, _) = p.ident("source")?;
                        set.insert(SourceId::new(s));
                        if p.peek().is_punct(',') && !p.peek_at(2).is_punct('=') {
                            p.bump();
                        } else {
                            break;
                        }
                    }
                }
                sources = Some(set);
            }
            _ => {
                return Err(Parser::error(
                    &rtok,
                    format!("unknown scope role `{role}`; expected A, B, X, Y or sources"),
                ))
            }
        }
        if !p.eat_punct(',') {
            break;
        }
    }
    p.expect_punct(')')?;
    let (Some(a), Some(b)) = (roles.get("A"), roles.get("B")) else {
        return Err(Parser::error(scope_tok, "scope needs both A and B"));
    };
    let mut scope = TransformationScope::new(a.as_str(), b.as_str(), sources.unwrap_or_default());
    match (roles.get("X"), roles.get("Y")) {
        (Some(x), Some(y)) => scope = scope.with_insourcer(x.as_str(), y.as_str()),
        (None, None) => {}
        _ => return Err(Parser::error(scope_tok, "scope needs X and Y together")),
    }
    Ok(scope)
}

fn guard(p: &mut Parser) -> PResult<Guard> {
    let tok = p.peek().clone();
    if p.eat_word("exists") {
        let (k, ktok) = p.word("entity kind")?;
        let kind = match k.as_str() {
            "unit" => EntityKind::Unit,
            "subunit" => EntityKind::Subunit,
            "source" => EntityKind::Source,
            "title" => EntityKind::Title,
            "service" => EntityKind::Service,
            "contract" => EntityKind::Contract,
            _ => {
                return Err(Parser::error(
                    &ktok,
                    format!("unknown entity kind `{k}`; expected unit, subunit, source, title, service or contract"),
                ))
            }
        };
        let (id, _) = p.ident("entity")?;
        Ok(Guard::Exists { kind, id })
    } else if p.eat_word("title-at") {
        let (s, _) = p.ident("source")?;
        p.expect_word("level")?;
        let (level, _) = p.level()?;
        Ok(Guard::TitleAtLevel {
            source: SourceId::new(s),
            level,
        })
    } else if p.eat_word("contract-present") {
        let (c, _) = p.ident("contract")?;
        Ok(Guard::ContractPresent {
            contract: ContractId::new(c),
        })
    } else {
        Err(Parser::error(
            &tok,
            format!(
                "expected `exists`, `title-at` or `contract-present`, found {}",
                Parser::describe(&tok)
            ),
        ))
    }
}

fn builtin_scale_of(kind: &SourceType) -> Option<&'static TitleScale> {
    match kind {
        SourceType::Custom(_) => None,
        other => crate::scale::builtin_scale(other.scale_id()),
    }
}

fn step(p: &mut Parser) -> PResult<Step> {
    let tok = p.peek().clone();
    let s = if p.eat_word("transfer") {
        let (source, _) = p.ident("source")?;
        p.expect_word("to")?;
        let (to, _) = p.subunit_ref()?;
        p.expect_word("level")?;
        let (level, _) = p.level()?;
        let bindings = p.bindings()?;
        Step::TransferTitle {
            source: SourceId::new(source),
            to,
            level,
            bindings,
        }
    } else if p.eat_word("retitle") {
        let (source, _) = p.ident("source")?;
        p.expect_word("level")?;
        let (level, _) = p.level()?;
        let bindings = p.bindings()?;
        Step::ChangeTitleLevel {
            source: SourceId::new(source),
            level,
            bindings,
        }
    } else if p.eat_word("abandon") {
        let (source, _) = p.ident("source")?;
        Step::AbandonTitle {
            source: SourceId::new(source),
        }
    } else if p.eat_word("acquire") {
        let (id, _) = p.ident("source")?;
        p.expect_punct(':')?;
        let (kind, _) = p.source_type()?;
        p.expect_word("level")?;
        let (level, ltok) = p.level()?;
        Parser::check_level(&ltok, level, builtin_scale_of(&kind))?;
        let o = p.source_options(true)?;
        p.expect_word("in")?;
        let (into, _) = p.subunit_ref()?;
        let critical = o.critical.map(|c| c.unwrap_or_else(|| into.unit.clone()));
        Step::AcquireSource {
            source: Source {
                id: SourceId::new(id),
                kind,
                identity_critical_for: critical,
                advantage: o.flags,
                costs: o.costs,
            },
            level,
            bindings: o.bindings,
            into,
        }
    } else if p.eat_word("move-service") {
        let (service, _) = p.ident("service")?;
        p.expect_word("to")?;
        let (to, _) = p.subunit_ref()?;
        Step::MoveService {
            service: ServiceId::new(service),
            to,
        }
    } else if p.eat_word("create-unit") {
        let (u, _) = p.ident("unit")?;
        Step::CreateUnit {
            unit: UnitId::new(u),
        }
    } else if p.eat_word("create-subunit") {
        let (s, _) = p.ident("subunit")?;
        p.expect_word("in")?;
        let (u, _) = p.ident("unit")?;
        Step::CreateSubunit {
            subunit: SubunitId::new(s),
            unit: UnitId::new(u),
        }
    } else if p.eat_word("dissolve-subunit") {
        let (target, _) = p.subunit_ref()?;
        Step::DissolveSubunit { target }
    } else if p.eat_word("dissolve-unit") {
        let (u, _) = p.ident("unit")?;
        Step::DissolveUnit {
            unit: UnitId::new(u),
        }
    } else if p.eat_word("sign") {
        let (contract, _) = p.contract_spec()?;
        Step::SignContract { contract }
    } else if p.eat_word("terminate") {
        let (c, _) = p.ident("contract")?;
        Step::TerminateContract {
            contract: ContractId::new(c),
        }
    } else if p.eat_word("pay") {
        let (payer, _) = p.ident("unit")?;
        p.expect_word("to")?;
        let (payee, _) = p.ident("unit")?;
        p.expect_word("amount")?;
        let (amount, _) = p.real("amount")?;
        Step::FinancialTransfer {
            payer: UnitId::new(payer),
            payee: UnitId::new(payee),
            amount,
        }
    } else {
        return Err(Parser::error(
            &tok,
            format!("expected a step, found {}", Parser::describe(&tok)),
        ));
    };
    Ok(s)
}

/// Parses a single step, as printed by `Step`'s `Display`.
pub fn parse_step(text: &str) -> Result<Step, Vec<Diagnostic>> {
    let toks = tokenize(text)?;
    let mut p = Parser::new(&toks);
    let s = step(&mut p).map_err(|d| vec![d])?;
    if !p.at_end() {
        return Err(vec![Parser::error(
            p.peek(),
            format!("unexpected {}", Parser::describe(p.peek())),
        )]);
    }
    Ok(s)
}
