use std::collections::HashMap;
use std::fs;
use std::path::Path;

use super::{Atom, Rule, RuleError, RuleId, RuleProgram, Term, Variable, MAX_BODY_LEN};
use crate::store::{EntityId, RelationId, Vocabulary};

/// Maximum absolute difference tolerated between the stated confidence and
/// `support / body_groundings`.
const CONFIDENCE_TOLERANCE: f64 = 1e-6;

/// Reads a rule file. Symbols are resolved against the dataset vocabularies;
/// symbols the dataset does not know get fresh ids past the end of the
/// vocabulary, so rules mentioning them simply never ground.
pub fn parse_rule_file(
    path: impl AsRef<Path>,
    entities: &Vocabulary,
    relations: &Vocabulary,
) -> Result<RuleProgram, RuleError> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|source| RuleError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_rules(&text, entities, relations)
}

/// Parses rule-file text; see [`parse_rule_file`].
pub fn parse_rules(text: &str, entities: &Vocabulary, relations: &Vocabulary) -> Result<RuleProgram, RuleError> {
    let mut symbols = Symbols::new(entities, relations);
    let mut rules = Vec::new();
    let mut seen: HashMap<(Atom, Vec<Atom>), usize> = HashMap::new();
    for (i, line) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = line.strip_suffix('\r').unwrap_or(line);
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let mut rule = parse_line(line, line_no, &mut symbols)?;
        let key = (rule.head, rule.body.clone());
        if let Some(first) = seen.insert(key, line_no) {
            return Err(RuleError::Rejected {
                line: line_no,
                message: format!("duplicate of the rule on line {first}"),
            });
        }
        rule.origin = RuleId(rules.len() as u32);
        rules.push(rule);
    }
    Ok(RuleProgram::new(rules))
}

struct Symbols<'a> {
    entities: &'a Vocabulary,
    relations: &'a Vocabulary,
    extra_entities: HashMap<String, u32>,
    extra_relations: HashMap<String, u32>,
}

impl<'a> Symbols<'a> {
    fn new(entities: &'a Vocabulary, relations: &'a Vocabulary) -> Self {
        Symbols {
            entities,
            relations,
            extra_entities: HashMap::new(),
            extra_relations: HashMap::new(),
        }
    }

    fn entity(&mut self, name: &str) -> EntityId {
        EntityId(resolve(self.entities, &mut self.extra_entities, name))
    }

    fn relation(&mut self, name: &str) -> RelationId {
        RelationId(resolve(self.relations, &mut self.extra_relations, name))
    }
}

fn resolve(vocab: &Vocabulary, extra: &mut HashMap<String, u32>, name: &str) -> u32 {
    if let Some(id) = vocab.get(name) {
        return id;
    }
    let next = (vocab.len() + extra.len()) as u32;
    *extra.entry(name.to_string()).or_insert(next)
}

fn parse_line(line: &str, line_no: usize, symbols: &mut Symbols<'_>) -> Result<Rule, RuleError> {
    let syntax = |column: usize, message: String| RuleError::Syntax {
        line: line_no,
        column,
        message,
    };
    let fields: Vec<&str> = line.split('\t').collect();
    if fields.len() != 4 {
        return Err(syntax(
            1,
            format!(
                "expected bodyGroundings<TAB>support<TAB>confidence<TAB>rule, found {} field(s)",
                fields.len()
            ),
        ));
    }
    let mut offsets = [1usize; 4];
    for i in 1..4 {
        offsets[i] = offsets[i - 1] + fields[i - 1].chars().count() + 1;
    }
    let body_groundings: u64 = fields[0]
        .trim()
        .parse()
        .map_err(|_| syntax(offsets[0], format!("invalid body-grounding count {:?}", fields[0])))?;
    let support: u64 = fields[1]
        .trim()
        .parse()
        .map_err(|_| syntax(offsets[1], format!("invalid support {:?}", fields[1])))?;
    let stated: f64 = fields[2]
        .trim()
        .parse()
        .map_err(|_| syntax(offsets[2], format!("invalid confidence {:?}", fields[2])))?;
    if !(0.0..=1.0).contains(&stated) {
        return Err(syntax(offsets[2], format!("confidence {stated} outside [0, 1]")));
    }
    if support > body_groundings {
        return Err(syntax(
            offsets[1],
            format!("support {support} exceeds body groundings {body_groundings}"),
        ));
    }
    let confidence = if body_groundings > 0 {
        let derived = support as f64 / body_groundings as f64;
        if (derived - stated).abs() > CONFIDENCE_TOLERANCE {
            return Err(syntax(
                offsets[2],
                format!("confidence {stated} does not match {support}/{body_groundings} = {derived}"),
            ));
        }
        derived
    } else {
        stated
    };

    let text = fields[3];
    let mut cursor = Cursor::new(text, offsets[3], line_no);
    let head = cursor.atom(symbols)?;
    cursor.skip_ws();
    if !cursor.eat("<=") {
        return Err(cursor.error("expected '<='"));
    }
    let mut body = Vec::new();
    loop {
        cursor.skip_ws();
        if body.is_empty() && cursor.at_end() {
            break;
        }
        body.push(cursor.atom(symbols)?);
        cursor.skip_ws();
        if cursor.at_end() {
            break;
        }
        if !cursor.eat(",") {
            return Err(cursor.error("expected ',' between body atoms"));
        }
        cursor.skip_ws();
        if cursor.at_end() {
            return Err(cursor.error("trailing ',' after last body atom"));
        }
    }

    validate(&head, &body).map_err(|message| RuleError::Rejected { line: line_no, message })?;

    Ok(Rule {
        id: RuleId(0),
        origin: RuleId(0),
        head,
        body,
        confidence,
        support,
        body_groundings,
        text: text.trim().to_string(),
    })
}

fn validate(head: &Atom, body: &[Atom]) -> Result<(), String> {
    match (head.subject, head.object) {
        (Term::Const(_), Term::Const(_)) => return Err("head has no variable".into()),
        (Term::Var(a), Term::Var(b)) if a == b => return Err("head repeats a variable".into()),
        _ => {}
    }
    if body.is_empty() {
        return Err("empty body".into());
    }
    if body.len() > MAX_BODY_LEN {
        return Err(format!("body has {} atoms, at most {MAX_BODY_LEN} allowed", body.len()));
    }
    let mut reachable: Vec<Variable> = head.vars().collect();
    for (i, atom) in body.iter().enumerate() {
        if !atom.vars().any(|v| reachable.contains(&v)) {
            return Err(format!(
                "body is disconnected: atom {} shares no variable with the head or earlier atoms",
                i + 1
            ));
        }
        reachable.extend(atom.vars());
    }
    let body_vars: Vec<Variable> = body.iter().flat_map(Atom::vars).collect();
    if let Some(v) = head.vars().find(|v| !body_vars.contains(v)) {
        return Err(format!("head variable {} does not occur in the body", v.name()));
    }
    Ok(())
}

struct Cursor {
    chars: Vec<char>,
    pos: usize,
    base_column: usize,
    line: usize,
}

impl Cursor {
    fn new(src: &str, base_column: usize, line: usize) -> Self {
        Cursor {
            chars: src.chars().collect(),
            pos: 0,
            base_column,
            line,
        }
    }

    fn error(&self, message: &str) -> RuleError {
        RuleError::Syntax {
            line: self.line,
            column: self.base_column + self.pos,
            message: message.to_string(),
        }
    }

    fn at_end(&self) -> bool {
        self.pos >= self.chars.len()
    }

    fn skip_ws(&mut self) {
        while self.pos < self.chars.len() && self.chars[self.pos] == ' ' {
            self.pos += 1;
        }
    }

    fn eat(&mut self, token: &str) -> bool {
        let n = token.chars().count();
        if self.chars.len() >= self.pos + n && self.chars[self.pos..self.pos + n].iter().copied().eq(token.chars()) {
            self.pos += n;
            true
        } else {
            false
        }
    }

    fn take_until(&mut self, stop: &[char]) -> String {
        let start = self.pos;
        while self.pos < self.chars.len() && !stop.contains(&self.chars[self.pos]) {
            self.pos += 1;
        }
        self.chars[start..self.pos].iter().collect()
    }

    fn atom(&mut self, symbols: &mut Symbols<'_>) -> Result<Atom, RuleError> {
        self.skip_ws();
        let rel_start = self.pos;
        let relation = self.take_until(&['(', ',', ' ']);
        if relation.is_empty() {
            self.pos = rel_start;
            return Err(self.error("expected relation name"));
        }
        if !self.eat("(") {
            return Err(self.error("expected '('"));
        }
        let subject = self.term(&[',', ')'], symbols)?;
        if !self.eat(",") {
            return Err(self.error("expected ',' between terms"));
        }
        let object = self.term(&[',', ')'], symbols)?;
        if !self.eat(")") {
            return Err(self.error("expected ')'"));
        }
        Ok(Atom {
            relation: symbols.relation(&relation),
            subject,
            object,
        })
    }

    fn term(&mut self, stop: &[char], symbols: &mut Symbols<'_>) -> Result<Term, RuleError> {
        let start = self.pos;
        let token = self.take_until(stop);
        if token.is_empty() {
            self.pos = start;
            return Err(self.error("expected a term"));
        }
        let mut chars = token.chars();
        Ok(match (chars.next().and_then(Variable::new), chars.next()) {
            (Some(v), None) => Term::Var(v),
            _ => Term::Const(symbols.entity(&token)),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn vocab(names: &[&str]) -> Vocabulary {
        let mut v = Vocabulary::new();
        for n in names {
            v.intern(n);
        }
        v
    }

    fn parse(text: &str) -> Result<RuleProgram, RuleError> {
        parse_rules(text, &vocab(&["a", "b", "c"]), &vocab(&["r", "s", "t"]))
    }

    #[test]
    fn chain_rule() {
        let p = parse("20\t18\t0.9\tr(X,Y) <= s(X,A), t(A,Y)").unwrap();
        let rule = &p.rules()[0];
        assert_eq!(rule.body.len(), 2);
        assert!((rule.confidence - 0.9).abs() < 1e-12);
        assert_eq!((rule.support, rule.body_groundings), (18, 20));
        assert_eq!(rule.head.relation, RelationId(0));
        assert_eq!(rule.body[1].relation, RelationId(2));
        assert_eq!(rule.text, "r(X,Y) <= s(X,A), t(A,Y)");
    }

    #[test]
    fn acyclic_rule_with_head_constant() {
        let p = parse("10\t10\t1.0\tr(X,c) <= s(X,A)").unwrap();
        let rule = &p.rules()[0];
        assert_eq!(rule.head.object, Term::Const(EntityId(2)));
        assert_eq!(rule.confidence, 1.0);
    }

    #[test]
    fn spaces_around_separator_are_optional() {
        let p = parse("4\t2\t0.5\tr(X,Y)<=s(X,A),t(A,Y)\n4\t2\t0.5\tr(Y,X)   <=   s(X,Y)").unwrap();
        assert_eq!(p.len(), 2);
        assert_eq!(p.rules()[1].origin, RuleId(1));
    }

    #[test]
    fn disconnected_body_is_rejected() {
        let err = parse("4\t2\t0.5\tr(X,Y) <= s(Y,Z), t(W,Q)").unwrap_err();
        assert!(matches!(err, RuleError::Rejected { line: 1, .. }), "{err}");
    }

    #[test]
    fn bare_rule_string_is_a_syntax_error() {
        let err = parse("r(X,Y) <= s(Y,Z), t(W,Q)").unwrap_err();
        assert!(matches!(err, RuleError::Syntax { line: 1, column: 1, .. }), "{err}");
    }

    #[test]
    fn syntax_error_column_points_into_rule() {
        let line = "4\t2\t0.5\tr(X,Y) <= s(X Y)";
        let err = parse(line).unwrap_err();
        match err {
            RuleError::Syntax { column, .. } => {
                // the offending character is the ')' where ',' was expected
                assert_eq!(line.chars().nth(column - 1), Some(')'));
            }
            other => panic!("{other}"),
        }
    }

    #[test]
    fn trailing_comma_is_rejected() {
        assert!(matches!(
            parse("4\t2\t0.5\tr(X,Y) <= s(X,Y),").unwrap_err(),
            RuleError::Syntax { .. }
        ));
    }

    #[test]
    fn confidence_must_match_counts() {
        assert!(parse("20\t18\t0.9000001\tr(X,Y) <= s(X,Y)").is_ok());
        assert!(matches!(
            parse("20\t18\t0.8\tr(X,Y) <= s(X,Y)").unwrap_err(),
            RuleError::Syntax { column: 7, .. }
        ));
    }

    #[test]
    fn long_body_is_rejected() {
        let err = parse("4\t2\t0.5\tr(X,Y) <= s(X,A), t(A,B), s(B,C), t(C,Y)").unwrap_err();
        assert!(matches!(err, RuleError::Rejected { .. }));
    }

    #[test]
    fn unsafe_head_variable_is_rejected() {
        assert!(matches!(
            parse("4\t2\t0.5\tr(X,Y) <= s(X,A)").unwrap_err(),
            RuleError::Rejected { .. }
        ));
    }

    #[test]
    fn duplicate_rule_is_rejected() {
        let err = parse("4\t2\t0.5\tr(X,Y) <= s(X,Y)\n8\t4\t0.5\tr(X,Y) <= s(X,Y)").unwrap_err();
        assert!(matches!(err, RuleError::Rejected { line: 2, .. }));
    }

    #[test]
    fn unknown_symbols_get_ids_past_the_vocabulary() {
        let p = parse("4\t2\t0.5\tr(X,zz) <= u(X,A)\n4\t2\t0.5\tr(X,zz) <= s(X,A)").unwrap();
        assert_eq!(p.rules()[0].head.object, Term::Const(EntityId(3)));
        assert_eq!(p.rules()[0].body[0].relation, RelationId(3));
        assert_eq!(p.rules()[1].head.object, Term::Const(EntityId(3)));
    }

    #[test]
    fn comments_and_blank_lines_are_skipped() {
        let p = parse("# header\n\n4\t2\t0.5\tr(X,Y) <= s(X,Y)\n").unwrap();
        assert_eq!(p.len(), 1);
    }
}
