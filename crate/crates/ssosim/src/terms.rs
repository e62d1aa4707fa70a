//! Symbolic term algebra and attacker derivation engine.
//!
//! Terms are finite trees compared structurally; "encryption" is deterministic
//! and perfect in the usual symbolic sense. The attacker engine computes a
//! decomposition closure ([`close`]) and answers synthesis queries on top of it
//! ([`can_derive`]). An offline-guessing rule recovers weak (user-chosen)
//! secrets whenever the closure contains a term the attacker could rebuild
//! from a candidate guess and already-known material.
//!
//! `close` keeps the decomposed core finite: constructors (pairing, hashing,
//! encryption, ...) are one-way or composable on demand, so derivability of a
//! composite target is decided by [`can_derive`] rather than by materialising
//! the infinite construction closure.
//!
//! Atoms are public constants (principal names, protocol labels); synthesis
//! treats them as always available. Secrets never live in atoms — they are
//! `Nonce`, `SymKey`, `PrivKey`, or `WeakSecret` leaves with a [`SecretClass`]
//! entry.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use thiserror::Error;

/// Identifier shared by a secret and (for key pairs) both key halves.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct SecretId(pub String);

impl SecretId {
    pub fn new(s: impl Into<String>) -> Self {
        SecretId(s.into())
    }
}

impl fmt::Display for SecretId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Strength {
    /// User-chosen (passwords, PINs): recoverable offline given a verifier.
    Weak,
    /// Randomly generated keys and nonces.
    Strong,
}

/// Classification of one secret id. `extractable: false` models secure
/// hardware storage: a store leak of the holding principal does not yield the
/// term.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SecretClass {
    pub strength: Strength,
    pub extractable: bool,
}

impl SecretClass {
    pub fn weak() -> Self {
        SecretClass { strength: Strength::Weak, extractable: true }
    }
    pub fn strong() -> Self {
        SecretClass { strength: Strength::Strong, extractable: true }
    }
    pub fn hardware() -> Self {
        SecretClass { strength: Strength::Strong, extractable: false }
    }
}

pub type ClassMap = BTreeMap<SecretId, SecretClass>;

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Term {
    Atom(String),
    Nonce(SecretId),
    SymKey(SecretId),
    PrivKey(SecretId),
    PubKey(SecretId),
    WeakSecret(SecretId),
    Pair(Box<Term>, Box<Term>),
    /// key, payload — key position holds SymKey, Kdf, or WeakSecret.
    SymEnc(Box<Term>, Box<Term>),
    /// pubkey, payload.
    AsymEnc(Box<Term>, Box<Term>),
    /// privkey, payload. The payload is recoverable from the signature.
    Sign(Box<Term>, Box<Term>),
    Hash(Box<Term>),
    /// secret, label — label is an Atom distinguishing derived keys.
    Kdf(Box<Term>, Box<Term>),
    /// key, payload — key position as for SymEnc.
    Mac(Box<Term>, Box<Term>),
}

impl Term {
    pub fn atom(s: impl Into<String>) -> Term {
        Term::Atom(s.into())
    }

    pub fn pair(a: Term, b: Term) -> Term {
        Term::Pair(Box::new(a), Box::new(b))
    }

    /// Right-nested pair chain of two or more terms.
    pub fn list(items: &[Term]) -> Term {
        assert!(!items.is_empty(), "empty term list");
        let mut it = items.iter().rev().cloned();
        let mut acc = it.next().unwrap();
        for t in it {
            acc = Term::pair(t, acc);
        }
        acc
    }

    pub fn sym_enc(key: Term, payload: Term) -> Term {
        debug_assert!(
            matches!(key, Term::SymKey(_) | Term::Kdf(..) | Term::WeakSecret(_)),
            "SymEnc key must be SymKey, Kdf or WeakSecret"
        );
        Term::SymEnc(Box::new(key), Box::new(payload))
    }

    pub fn asym_enc(pubkey: Term, payload: Term) -> Term {
        debug_assert!(matches!(pubkey, Term::PubKey(_)), "AsymEnc key must be PubKey");
        Term::AsymEnc(Box::new(pubkey), Box::new(payload))
    }

    pub fn sign(privkey: Term, payload: Term) -> Term {
        debug_assert!(matches!(privkey, Term::PrivKey(_)), "Sign key must be PrivKey");
        Term::Sign(Box::new(privkey), Box::new(payload))
    }

    pub fn hash(payload: Term) -> Term {
        Term::Hash(Box::new(payload))
    }

    pub fn kdf(secret: Term, label: Term) -> Term {
        debug_assert!(matches!(label, Term::Atom(_)), "Kdf label must be an Atom");
        Term::Kdf(Box::new(secret), Box::new(label))
    }

    pub fn mac(key: Term, payload: Term) -> Term {
        debug_assert!(
            matches!(key, Term::SymKey(_) | Term::Kdf(..) | Term::WeakSecret(_)),
            "Mac key must be SymKey, Kdf or WeakSecret"
        );
        Term::Mac(Box::new(key), Box::new(payload))
    }

    /// Secret id of a bare secret leaf, if this term is one.
    pub fn secret_id(&self) -> Option<&SecretId> {
        match self {
            Term::Nonce(id)
            | Term::SymKey(id)
            | Term::PrivKey(id)
            | Term::PubKey(id)
            | Term::WeakSecret(id) => Some(id),
            _ => None,
        }
    }

    /// All subterms, including self.
    pub fn subterms(&self) -> Vec<&Term> {
        let mut out = vec![self];
        match self {
            Term::Pair(a, b)
            | Term::SymEnc(a, b)
            | Term::AsymEnc(a, b)
            | Term::Sign(a, b)
            | Term::Kdf(a, b)
            | Term::Mac(a, b) => {
                out.extend(a.subterms());
                out.extend(b.subterms());
            }
            Term::Hash(a) => out.extend(a.subterms()),
            _ => {}
        }
        out
    }

    pub fn contains(&self, needle: &Term) -> bool {
        self.subterms().iter().any(|t| *t == needle)
    }

    /// True if the atom `name` occurs anywhere inside this term.
    pub fn mentions_atom(&self, name: &str) -> bool {
        self.subterms()
            .iter()
            .any(|t| matches!(t, Term::Atom(a) if a == name))
    }
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Term::Atom(a) => write!(f, "{a}"),
            Term::Nonce(id) => write!(f, "(n {id})"),
            Term::SymKey(id) => write!(f, "(k {id})"),
            Term::PrivKey(id) => write!(f, "(sk {id})"),
            Term::PubKey(id) => write!(f, "(pk {id})"),
            Term::WeakSecret(id) => write!(f, "(w {id})"),
            Term::Pair(a, b) => write!(f, "(pair {a} {b})"),
            Term::SymEnc(k, m) => write!(f, "(senc {k} {m})"),
            Term::AsymEnc(k, m) => write!(f, "(aenc {k} {m})"),
            Term::Sign(k, m) => write!(f, "(sig {k} {m})"),
            Term::Hash(m) => write!(f, "(hash {m})"),
            Term::Kdf(s, l) => write!(f, "(kdf {s} {l})"),
            Term::Mac(k, m) => write!(f, "(mac {k} {m})"),
        }
    }
}

/// A finite set of terms a principal (or the attacker) holds.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Knowledge {
    terms: BTreeSet<Term>,
}

impl Knowledge {
    pub fn new() -> Self {
        Knowledge::default()
    }

    pub fn insert(&mut self, t: Term) -> bool {
        self.terms.insert(t)
    }

    pub fn extend(&mut self, other: &Knowledge) {
        for t in &other.terms {
            self.terms.insert(t.clone());
        }
    }

    pub fn contains(&self, t: &Term) -> bool {
        self.terms.contains(t)
    }

    pub fn iter(&self) -> impl Iterator<Item = &Term> {
        self.terms.iter()
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }
}

impl FromIterator<Term> for Knowledge {
    fn from_iter<I: IntoIterator<Item = Term>>(iter: I) -> Self {
        Knowledge { terms: iter.into_iter().collect() }
    }
}

impl fmt::Display for Knowledge {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for t in &self.terms {
            writeln!(f, "{t}")?;
        }
        Ok(())
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum TermError {
    #[error("secret `{0}` has no classification entry")]
    Unclassified(SecretId),
}

/// Whether the guessing rule may fire, and for which secrets.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum GuessPolicy {
    Enabled,
    Disabled,
    /// Guessing enabled except for the named secret (used to enumerate the
    /// verifiers an attacker had available *before* recovering it).
    ExceptFor(SecretId),
}

/// How one weak secret was recovered.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GuessInfo {
    /// Terms the attacker could rebuild from the guess to confirm it.
    pub verifiers: Vec<Term>,
    /// True when every verifier exposes the secret only through `Kdf`
    /// applications, i.e. the attacker confirmed guesses against a derived
    /// key rather than a direct image of the secret.
    pub kdf_gated: bool,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClosureReport {
    pub closure: Knowledge,
    pub guesses: BTreeMap<SecretId, GuessInfo>,
}

/// Least decomposition fixpoint of `k` under the derivation rules.
pub fn close(k: &Knowledge, classes: &ClassMap) -> Result<Knowledge, TermError> {
    close_report(k, classes, GuessPolicy::Enabled).map(|r| r.closure)
}

/// As [`close`], with per-secret guessing diagnostics.
pub fn close_report(
    k: &Knowledge,
    classes: &ClassMap,
    policy: GuessPolicy,
) -> Result<ClosureReport, TermError> {
    check_classified(k, classes)?;
    let closure = saturate(k, classes, &policy);

    let mut guesses = BTreeMap::new();
    if policy != GuessPolicy::Disabled {
        for t in closure.iter() {
            if let Term::WeakSecret(id) = t {
                if k.contains(t) {
                    continue; // known from the start, not guessed
                }
                // Re-close without guessing this one secret: its verifiers are
                // whatever the attacker could check a candidate guess against.
                let pre = saturate(k, classes, &GuessPolicy::ExceptFor(id.clone()));
                if pre.contains(t) {
                    continue; // reachable without guessing it (e.g. decrypted)
                }
                let verifiers: Vec<Term> = pre
                    .iter()
                    .filter(|v| is_verifier(v, id, &pre))
                    .cloned()
                    .collect();
                if verifiers.is_empty() {
                    continue;
                }
                let kdf_gated = verifiers.iter().all(|v| !occurs_outside_kdf(v, id));
                guesses.insert(id.clone(), GuessInfo { verifiers, kdf_gated });
            }
        }
    }
    Ok(ClosureReport { closure, guesses })
}

/// True iff `target` is a member of the closure of `k` or composable from it.
pub fn can_derive(k: &Knowledge, target: &Term, classes: &ClassMap) -> Result<bool, TermError> {
    let closed = close(k, classes)?;
    Ok(synthesizable(target, &closed))
}

/// Synthesis check over an already-closed knowledge set: composition by
/// constructors, public-key halves from held private keys, atoms free.
pub fn synthesizable(target: &Term, closed: &Knowledge) -> bool {
    if closed.contains(target) {
        return true;
    }
    match target {
        Term::Atom(_) => true,
        Term::PubKey(id) => closed.contains(&Term::PrivKey(id.clone())),
        Term::Pair(a, b)
        | Term::SymEnc(a, b)
        | Term::AsymEnc(a, b)
        | Term::Sign(a, b)
        | Term::Kdf(a, b)
        | Term::Mac(a, b) => synthesizable(a, closed) && synthesizable(b, closed),
        Term::Hash(a) => synthesizable(a, closed),
        _ => false,
    }
}

fn check_classified(k: &Knowledge, classes: &ClassMap) -> Result<(), TermError> {
    for t in k.iter() {
        for sub in t.subterms() {
            if let Some(id) = sub.secret_id() {
                if !classes.contains_key(id) {
                    return Err(TermError::Unclassified(id.clone()));
                }
            }
        }
    }
    Ok(())
}

fn saturate(k: &Knowledge, classes: &ClassMap, policy: &GuessPolicy) -> Knowledge {
    let mut set = k.clone();
    loop {
        let mut fresh: Vec<Term> = Vec::new();
        for t in set.iter() {
            match t {
                Term::Pair(a, b) => {
                    fresh.push((**a).clone());
                    fresh.push((**b).clone());
                }
                Term::Sign(_, m) => fresh.push((**m).clone()),
                Term::SymEnc(key, m) => {
                    if synthesizable(key, &set) {
                        fresh.push((**m).clone());
                    }
                }
                Term::AsymEnc(pk, m) => {
                    if let Term::PubKey(id) = &**pk {
                        if set.contains(&Term::PrivKey(id.clone())) {
                            fresh.push((**m).clone());
                        }
                    }
                }
                Term::PrivKey(id) => fresh.push(Term::PubKey(id.clone())),
                _ => {}
            }
        }

        // Offline guessing: a weak secret joins the closure as soon as some
        // held term doubles as a verifier for it.
        for (id, class) in classes {
            if class.strength != Strength::Weak {
                continue;
            }
            match policy {
                GuessPolicy::Disabled => continue,
                GuessPolicy::ExceptFor(skip) if skip == id => continue,
                _ => {}
            }
            let secret = Term::WeakSecret(id.clone());
            if set.contains(&secret) {
                continue;
            }
            if set.iter().any(|t| is_verifier(t, id, &set)) {
                fresh.push(secret);
            }
        }

        let before = set.len();
        for t in fresh {
            set.insert(t);
        }
        if set.len() == before {
            return set;
        }
    }
}

/// Can `t` be rebuilt by constructors from `known` plus a guess of `secret`,
/// actually consuming the guess? Matching the rebuilt value against the held
/// `t` confirms the guess.
fn is_verifier(t: &Term, secret: &SecretId, known: &Knowledge) -> bool {
    if matches!(t, Term::WeakSecret(id) if id == secret) {
        return false;
    }
    rebuild_uses_guess(t, secret, known, true) == Some(true)
}

/// `Some(uses)` when the term is buildable; `uses` reports whether the guess
/// was consumed. Top-level terms must be decomposed (they are the comparison
/// target, not a leaf).
fn rebuild_uses_guess(t: &Term, secret: &SecretId, known: &Knowledge, top: bool) -> Option<bool> {
    if matches!(t, Term::WeakSecret(id) if id == secret) {
        return Some(true);
    }
    if !top && (known.contains(t) || matches!(t, Term::Atom(_))) {
        return Some(false);
    }
    if !top && matches!(t, Term::PubKey(id) if known.contains(&Term::PrivKey(id.clone()))) {
        return Some(false);
    }
    match t {
        Term::Atom(_) if top => None,
        Term::Pair(a, b)
        | Term::SymEnc(a, b)
        | Term::AsymEnc(a, b)
        | Term::Sign(a, b)
        | Term::Kdf(a, b)
        | Term::Mac(a, b) => {
            let ua = rebuild_uses_guess(a, secret, known, false)?;
            let ub = rebuild_uses_guess(b, secret, known, false)?;
            Some(ua || ub)
        }
        Term::Hash(a) => rebuild_uses_guess(a, secret, known, false),
        _ => None,
    }
}

/// Does `secret` occur in `t` anywhere other than as the secret argument of a
/// `Kdf`? Bare occurrences mean a direct image of the secret was available.
fn occurs_outside_kdf(t: &Term, secret: &SecretId) -> bool {
    match t {
        Term::WeakSecret(id) => id == secret,
        Term::Kdf(s, label) => {
            let inner = match &**s {
                Term::WeakSecret(id) if id == secret => false,
                other => occurs_outside_kdf(other, secret),
            };
            inner || occurs_outside_kdf(label, secret)
        }
        Term::Pair(a, b)
        | Term::SymEnc(a, b)
        | Term::AsymEnc(a, b)
        | Term::Sign(a, b)
        | Term::Mac(a, b) => occurs_outside_kdf(a, secret) || occurs_outside_kdf(b, secret),
        Term::Hash(a) => occurs_outside_kdf(a, secret),
        _ => false,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn classes(entries: &[(&str, SecretClass)]) -> ClassMap {
        entries
            .iter()
            .map(|(id, c)| (SecretId::new(*id), *c))
            .collect()
    }

    fn k(terms: &[Term]) -> Knowledge {
        terms.iter().cloned().collect()
    }

    fn sym(id: &str) -> Term {
        Term::SymKey(SecretId::new(id))
    }
    fn nonce(id: &str) -> Term {
        Term::Nonce(SecretId::new(id))
    }
    fn weak(id: &str) -> Term {
        Term::WeakSecret(SecretId::new(id))
    }
    fn privk(id: &str) -> Term {
        Term::PrivKey(SecretId::new(id))
    }
    fn pubk(id: &str) -> Term {
        Term::PubKey(SecretId::new(id))
    }

    #[test]
    fn empty_knowledge_derives_nothing() {
        let cl = close(&Knowledge::new(), &ClassMap::new()).unwrap();
        assert!(cl.is_empty());
    }

    #[test]
    fn decryption_with_held_key() {
        let cm = classes(&[("k1", SecretClass::strong()), ("n1", SecretClass::strong())]);
        let cl = close(&k(&[Term::sym_enc(sym("k1"), nonce("n1")), sym("k1")]), &cm).unwrap();
        assert!(cl.contains(&nonce("n1")));
    }

    #[test]
    fn weak_secret_guessed_from_hash_verifier() {
        let cm = classes(&[("pw", SecretClass::weak())]);
        let cl = close(&k(&[Term::hash(weak("pw"))]), &cm).unwrap();
        assert!(cl.contains(&weak("pw")));
    }

    #[test]
    fn strong_secret_not_guessed_from_hash() {
        let cm = classes(&[("pw", SecretClass::strong())]);
        let cl = close(&k(&[Term::hash(weak("pw"))]), &cm).unwrap();
        assert!(!cl.contains(&weak("pw")));
    }

    #[test]
    fn keypair_rule_one_way() {
        let cm = classes(&[("a", SecretClass::strong())]);
        assert!(can_derive(&k(&[privk("a")]), &pubk("a"), &cm).unwrap());
        assert!(!can_derive(&k(&[pubk("a")]), &privk("a"), &cm).unwrap());
    }

    #[test]
    fn signature_payload_extraction() {
        let cm = classes(&[("a", SecretClass::strong()), ("n1", SecretClass::strong())]);
        assert!(can_derive(&k(&[Term::sign(privk("a"), nonce("n1"))]), &nonce("n1"), &cm).unwrap());
    }

    #[test]
    fn guess_through_kdf_chain_is_gated() {
        // A hash of a derived key verifies the underlying password, and is
        // flagged as a kdf-gated recovery.
        let cm = classes(&[("pw", SecretClass::weak())]);
        let auth = Term::kdf(weak("pw"), Term::atom("auth"));
        let report =
            close_report(&k(&[Term::hash(auth)]), &cm, GuessPolicy::Enabled).unwrap();
        assert!(report.closure.contains(&weak("pw")));
        let info = &report.guesses[&SecretId::new("pw")];
        assert!(info.kdf_gated, "verifier only exposes pw through Kdf");
    }

    #[test]
    fn direct_hash_verifier_is_not_gated() {
        let cm = classes(&[("pw", SecretClass::weak())]);
        let report =
            close_report(&k(&[Term::hash(weak("pw"))]), &cm, GuessPolicy::Enabled).unwrap();
        assert!(!report.guesses[&SecretId::new("pw")].kdf_gated);
    }

    #[test]
    fn guessed_key_unlocks_ciphertext() {
        // Vault encrypted under kdf(pw, enc); hash of kdf(pw, auth) leaks the
        // password, which then opens the vault.
        let cm = classes(&[("pw", SecretClass::weak()), ("n1", SecretClass::strong())]);
        let enc = Term::kdf(weak("pw"), Term::atom("enc"));
        let auth = Term::kdf(weak("pw"), Term::atom("auth"));
        let cl = close(
            &k(&[Term::hash(auth), Term::sym_enc(enc, nonce("n1"))]),
            &cm,
        )
        .unwrap();
        assert!(cl.contains(&nonce("n1")));
    }

    #[test]
    fn ciphertext_alone_is_no_verifier() {
        // senc(pw, m) with unknown m gives the attacker nothing to compare
        // a guess against.
        let cm = classes(&[("pw", SecretClass::weak()), ("n1", SecretClass::strong())]);
        let cl = close(&k(&[Term::sym_enc(weak("pw"), nonce("n1"))]), &cm).unwrap();
        assert!(!cl.contains(&weak("pw")));
    }

    #[test]
    fn ciphertext_of_known_payload_verifies() {
        let cm = classes(&[("pw", SecretClass::weak()), ("n1", SecretClass::strong())]);
        let cl = close(
            &k(&[Term::sym_enc(weak("pw"), nonce("n1")), nonce("n1")]),
            &cm,
        )
        .unwrap();
        assert!(cl.contains(&weak("pw")));
    }

    #[test]
    fn unclassified_secret_is_an_error() {
        let err = close(&k(&[nonce("mystery")]), &ClassMap::new()).unwrap_err();
        assert_eq!(err, TermError::Unclassified(SecretId::new("mystery")));
    }

    #[test]
    fn composite_targets_synthesize() {
        let cm = classes(&[("k1", SecretClass::strong()), ("n1", SecretClass::strong())]);
        let kn = k(&[sym("k1"), nonce("n1")]);
        assert!(can_derive(&kn, &Term::pair(sym("k1"), nonce("n1")), &cm).unwrap());
        assert!(can_derive(&kn, &Term::mac(sym("k1"), nonce("n1")), &cm).unwrap());
        assert!(!can_derive(&kn, &Term::sign(privk("k1"), nonce("n1")), &cm).unwrap());
    }

    #[test]
    fn canonical_rendering_is_stable() {
        let t = Term::sign(
            privk("idp"),
            Term::pair(Term::atom("alice"), Term::hash(weak("pw"))),
        );
        assert_eq!(t.to_string(), "(sig (sk idp) (pair alice (hash (w pw))))");
    }
}
