//! Simulated network of principals.
//!
//! A [`World`] is a single-threaded, discrete-step state machine: sends are
//! ordered, nonces come from a seeded counter, and the trace is replayable —
//! identical (scenario, seed) pairs yield byte-identical traces. There is no
//! time or latency; an outage is a phase toggle, not a timer.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use thiserror::Error;

use crate::terms::{ClassMap, Knowledge, SecretClass, SecretId, Term};

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct PrincipalId(pub String);

impl PrincipalId {
    pub fn new(s: impl Into<String>) -> Self {
        PrincipalId(s.into())
    }
    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for PrincipalId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Role {
    User,
    Device,
    IdP,
    SP,
    FederationOperator,
    SyncServer,
    MailProvider,
    BridgeIdP,
    Attacker,
}

impl fmt::Display for Role {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Role::User => "user",
            Role::Device => "device",
            Role::IdP => "idp",
            Role::SP => "sp",
            Role::FederationOperator => "federation-operator",
            Role::SyncServer => "sync-server",
            Role::MailProvider => "mail-provider",
            Role::BridgeIdP => "bridge-idp",
            Role::Attacker => "attacker",
        };
        f.write_str(s)
    }
}

/// Scope of a store entry: specific to one user, or server infrastructure
/// (association secrets, signing keys) shared across all users.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Scope {
    User(PrincipalId),
    Server,
}

#[derive(Debug, Clone)]
pub struct StoreEntry {
    pub term: Term,
    pub scope: Scope,
}

#[derive(Debug, Clone, Default)]
pub struct Store {
    entries: BTreeMap<String, StoreEntry>,
}

impl Store {
    pub fn get(&self, key: &str) -> Option<&Term> {
        self.entries.get(key).map(|e| &e.term)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&String, &StoreEntry)> {
        self.entries.iter()
    }

    pub fn keys_with_prefix<'a>(&'a self, prefix: &'a str) -> impl Iterator<Item = &'a String> {
        self.entries.keys().filter(move |k| k.starts_with(prefix))
    }
}

#[derive(Debug, Clone)]
pub struct Principal {
    pub id: PrincipalId,
    pub role: Role,
    /// Devices and tokens belong to exactly one user.
    pub owner: Option<PrincipalId>,
    pub online: bool,
    /// Separate hardware authenticator the user must carry (phone, OTP token).
    pub hardware_token: bool,
    pub store: Store,
    pub knowledge: Knowledge,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum ChannelKind {
    Web,
    Redirect,
    Email,
    Sms,
    PairingOob,
    DirectBackchannel,
}

impl fmt::Display for ChannelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            ChannelKind::Web => "web",
            ChannelKind::Redirect => "redirect",
            ChannelKind::Email => "email",
            ChannelKind::Sms => "sms",
            ChannelKind::PairingOob => "pairing-oob",
            ChannelKind::DirectBackchannel => "backchannel",
        };
        f.write_str(s)
    }
}

/// Point-to-point channel. TLS-protected legs are confidential and authentic;
/// redirects additionally pass through a browser device, which learns every
/// payload it carries.
#[derive(Debug, Clone)]
pub struct Channel {
    pub from: PrincipalId,
    pub to: PrincipalId,
    pub kind: ChannelKind,
    pub via: Option<PrincipalId>,
    pub confidential: bool,
    pub authentic: bool,
}

impl Channel {
    pub fn web(from: &PrincipalId, to: &PrincipalId) -> Self {
        Channel {
            from: from.clone(),
            to: to.clone(),
            kind: ChannelKind::Web,
            via: None,
            confidential: true,
            authentic: true,
        }
    }

    pub fn redirect(from: &PrincipalId, to: &PrincipalId, via: &PrincipalId) -> Self {
        Channel {
            from: from.clone(),
            to: to.clone(),
            kind: ChannelKind::Redirect,
            via: Some(via.clone()),
            confidential: true,
            authentic: true,
        }
    }

    pub fn email(from: &PrincipalId, to: &PrincipalId) -> Self {
        Channel {
            from: from.clone(),
            to: to.clone(),
            kind: ChannelKind::Email,
            via: None,
            confidential: true,
            authentic: true,
        }
    }

    pub fn sms(from: &PrincipalId, to: &PrincipalId) -> Self {
        Channel {
            from: from.clone(),
            to: to.clone(),
            kind: ChannelKind::Sms,
            via: None,
            confidential: true,
            authentic: true,
        }
    }

    pub fn pairing(from: &PrincipalId, to: &PrincipalId) -> Self {
        Channel {
            from: from.clone(),
            to: to.clone(),
            kind: ChannelKind::PairingOob,
            via: None,
            confidential: true,
            authentic: true,
        }
    }

    pub fn backchannel(from: &PrincipalId, to: &PrincipalId) -> Self {
        Channel {
            from: from.clone(),
            to: to.clone(),
            kind: ChannelKind::DirectBackchannel,
            via: None,
            confidential: true,
            authentic: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Annotation {
    None,
    ManualRegistration,
    UserAction,
    DeviceSetup,
    OobVerification,
    AssertionIssued,
    AssertionVerifiedLocally,
    IdPQueried,
    ProfileDataShared,
    LoASignalled,
    IdPSelected,
    KeyRevocation,
    UserNotification,
}

impl fmt::Display for Annotation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Annotation::None => "-",
            Annotation::ManualRegistration => "manual-registration",
            Annotation::UserAction => "user-action",
            Annotation::DeviceSetup => "device-setup",
            Annotation::OobVerification => "oob-verification",
            Annotation::AssertionIssued => "assertion-issued",
            Annotation::AssertionVerifiedLocally => "assertion-verified-locally",
            Annotation::IdPQueried => "idp-queried",
            Annotation::ProfileDataShared => "profile-data-shared",
            Annotation::LoASignalled => "loa-signalled",
            Annotation::IdPSelected => "idp-selected",
            Annotation::KeyRevocation => "key-revocation",
            Annotation::UserNotification => "user-notification",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone)]
pub struct TraceEvent {
    pub seq: u64,
    pub channel: Channel,
    pub payload: Term,
    pub annotation: Annotation,
}

impl fmt::Display for TraceEvent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let kind = match &self.channel.via {
            Some(v) => format!("{}(via={})", self.channel.kind, v),
            None => self.channel.kind.to_string(),
        };
        write!(
            f,
            "{:4} | {}->{} | {} | {} | {}",
            self.seq, self.channel.from, self.channel.to, kind, self.annotation, self.payload
        )
    }
}

#[derive(Debug, Clone)]
pub enum Fault {
    Outage(PrincipalId),
    StoreLeak(PrincipalId),
    MaliciousInsider(PrincipalId),
    CollusionOfSps(Vec<PrincipalId>),
}

#[derive(Debug, Error)]
pub enum WorldError {
    #[error("unknown principal `{0}`")]
    UnknownPrincipal(PrincipalId),
    #[error("delivery failure: `{0}` is offline")]
    DeliveryFailure(PrincipalId),
}

/// One simulated deployment: principals, their stores and knowledge, the
/// recorded trace, and the attacker's accumulated view.
#[derive(Debug, Clone)]
pub struct World {
    seed: u64,
    counter: u64,
    step: u64,
    principals: BTreeMap<PrincipalId, Principal>,
    pub classes: ClassMap,
    generators: BTreeMap<SecretId, PrincipalId>,
    trace: Vec<TraceEvent>,
    /// Payloads carried over non-confidential channels.
    pub observer: Knowledge,
    pub attacker_knowledge: Knowledge,
    pub attacker_controls: BTreeSet<PrincipalId>,
    pub collusions: Vec<Vec<PrincipalId>>,
    /// Public constants (ids, labels) every party knows.
    public: Knowledge,
    store_log: Vec<(u64, PrincipalId, String)>,
}

impl World {
    pub fn new(seed: u64) -> Self {
        World {
            seed,
            counter: 0,
            step: 0,
            principals: BTreeMap::new(),
            classes: ClassMap::new(),
            generators: BTreeMap::new(),
            trace: Vec::new(),
            observer: Knowledge::new(),
            attacker_knowledge: Knowledge::new(),
            attacker_controls: BTreeSet::new(),
            collusions: Vec::new(),
            public: Knowledge::new(),
            store_log: Vec::new(),
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Current step (equals the next trace sequence number).
    pub fn step(&self) -> u64 {
        self.step
    }

    /// Let simulated time pass without any events (certificate aging).
    pub fn advance(&mut self, steps: u64) {
        self.step += steps;
    }

    pub fn add_principal(&mut self, id: &str, role: Role, owner: Option<&PrincipalId>) -> PrincipalId {
        let pid = PrincipalId::new(id);
        self.public.insert(Term::atom(id));
        self.principals.insert(
            pid.clone(),
            Principal {
                id: pid.clone(),
                role,
                owner: owner.cloned(),
                online: true,
                hardware_token: false,
                store: Store::default(),
                knowledge: Knowledge::new(),
            },
        );
        pid
    }

    pub fn mark_hardware_token(&mut self, id: &PrincipalId) {
        self.principals.get_mut(id).expect("principal").hardware_token = true;
    }

    pub fn principal(&self, id: &PrincipalId) -> &Principal {
        self.principals.get(id).expect("principal")
    }

    pub fn principals(&self) -> impl Iterator<Item = &Principal> {
        self.principals.values()
    }

    pub fn make_public(&mut self, t: Term) {
        self.public.insert(t);
    }

    pub fn public(&self) -> &Knowledge {
        &self.public
    }

    fn next(&mut self) -> u64 {
        let n = self.seed.wrapping_add(self.counter);
        self.counter += 1;
        n
    }

    /// Fresh strong nonce; the hint keeps traces readable.
    pub fn nonce(&mut self, generator: &PrincipalId, hint: &str) -> Term {
        let id = SecretId::new(format!("{hint}.{}", self.next()));
        self.classes.insert(id.clone(), SecretClass::strong());
        self.generators.insert(id.clone(), generator.clone());
        Term::Nonce(id)
    }

    /// Stable-named weak secret (password, PIN).
    pub fn weak_secret(&mut self, generator: &PrincipalId, name: &str) -> Term {
        let id = SecretId::new(name);
        self.classes.insert(id.clone(), SecretClass::weak());
        self.generators.insert(id.clone(), generator.clone());
        Term::WeakSecret(id)
    }

    /// Stable-named strong symmetric key.
    pub fn sym_key(&mut self, generator: &PrincipalId, name: &str, extractable: bool) -> Term {
        let id = SecretId::new(name);
        self.classes.insert(
            id.clone(),
            SecretClass { strength: crate::terms::Strength::Strong, extractable },
        );
        self.generators.insert(id.clone(), generator.clone());
        Term::SymKey(id)
    }

    /// Stable-named key pair; returns (private, public).
    pub fn key_pair(&mut self, generator: &PrincipalId, name: &str, extractable: bool) -> (Term, Term) {
        let id = SecretId::new(name);
        self.classes.insert(
            id.clone(),
            SecretClass { strength: crate::terms::Strength::Strong, extractable },
        );
        self.generators.insert(id.clone(), generator.clone());
        (Term::PrivKey(id.clone()), Term::PubKey(id))
    }

    pub fn generator_of(&self, id: &SecretId) -> Option<&PrincipalId> {
        self.generators.get(id)
    }

    pub fn class_of(&self, id: &SecretId) -> Option<&SecretClass> {
        self.classes.get(id)
    }

    /// Store a record; the holder also learns the term.
    pub fn put(&mut self, holder: &PrincipalId, key: &str, term: Term, scope: Scope) {
        let step = self.step;
        let p = self.principals.get_mut(holder).expect("principal");
        p.knowledge.insert(term.clone());
        p.store.entries.insert(key.to_string(), StoreEntry { term, scope });
        self.store_log.push((step, holder.clone(), key.to_string()));
    }

    pub fn store_term(&self, holder: &PrincipalId, key: &str) -> Option<&Term> {
        self.principals.get(holder).and_then(|p| p.store.get(key))
    }

    pub fn store_log(&self) -> &[(u64, PrincipalId, String)] {
        &self.store_log
    }

    /// Deliver a payload. Fails (without state change) when an endpoint is
    /// under an outage; otherwise records exactly one trace event and updates
    /// the knowledge of the receiver, any redirect device on the path, the
    /// global observer (non-confidential channels only), and the attacker
    /// when a compromised principal sits on the path.
    pub fn send(
        &mut self,
        channel: Channel,
        payload: Term,
        annotation: Annotation,
    ) -> Result<(), WorldError> {
        for endpoint in [&channel.from, &channel.to].into_iter().chain(channel.via.iter()) {
            let p = self
                .principals
                .get(endpoint)
                .ok_or_else(|| WorldError::UnknownPrincipal(endpoint.clone()))?;
            if !p.online {
                return Err(WorldError::DeliveryFailure(endpoint.clone()));
            }
        }

        let mut touched: Vec<PrincipalId> = vec![channel.from.clone(), channel.to.clone()];
        if let Some(via) = &channel.via {
            touched.push(via.clone());
        }
        for pid in &touched {
            let p = self.principals.get_mut(pid).expect("checked above");
            p.knowledge.insert(payload.clone());
            if self.attacker_controls.contains(pid) {
                self.attacker_knowledge.insert(payload.clone());
            }
        }
        if !channel.confidential {
            self.observer.insert(payload.clone());
        }

        let event = TraceEvent { seq: self.step, channel, payload, annotation };
        self.step += 1;
        self.trace.push(event);
        Ok(())
    }

    pub fn trace(&self) -> &[TraceEvent] {
        &self.trace
    }

    pub fn trace_len(&self) -> usize {
        self.trace.len()
    }

    pub fn render_trace(&self) -> String {
        let mut out = String::new();
        for e in &self.trace {
            out.push_str(&e.to_string());
            out.push('\n');
        }
        out
    }

    /// Everything a principal saw: payloads sent or received plus its store.
    pub fn observe(&self, id: &PrincipalId) -> Knowledge {
        self.principal(id).knowledge.clone()
    }

    /// Store contents obtainable by a leak: everything except terms whose
    /// secret class marks them hardware-protected.
    pub fn leak(&self, id: &PrincipalId) -> Knowledge {
        self.leak_filtered(id, None)
    }

    /// As [`World::leak`], restricted to records scoped to one user. Server
    /// infrastructure secrets (association keys, TLS-grade signing keys) are
    /// out of scope for user-targeted extraction.
    pub fn leak_user_scoped(&self, id: &PrincipalId, user: &PrincipalId) -> Knowledge {
        self.leak_filtered(id, Some(user))
    }

    fn leak_filtered(&self, id: &PrincipalId, user: Option<&PrincipalId>) -> Knowledge {
        let p = self.principal(id);
        let mut out = Knowledge::new();
        for (_, entry) in p.store.iter() {
            if let Some(u) = user {
                match &entry.scope {
                    Scope::User(owner) if owner == u => {}
                    _ => continue,
                }
            }
            if self.hardware_protected(&entry.term) {
                continue;
            }
            out.insert(entry.term.clone());
        }
        out
    }

    fn hardware_protected(&self, t: &Term) -> bool {
        if let Some(id) = t.secret_id() {
            if let Some(class) = self.classes.get(id) {
                return !class.extractable && !matches!(t, Term::PubKey(_));
            }
        }
        false
    }

    pub fn inject(&mut self, fault: Fault) -> Result<(), WorldError> {
        match fault {
            Fault::Outage(p) => {
                self.principals
                    .get_mut(&p)
                    .ok_or(WorldError::UnknownPrincipal(p))?
                    .online = false;
            }
            Fault::StoreLeak(p) => {
                if !self.principals.contains_key(&p) {
                    return Err(WorldError::UnknownPrincipal(p));
                }
                let leaked = self.leak(&p);
                self.attacker_knowledge.extend(&leaked);
            }
            Fault::MaliciousInsider(p) => {
                if !self.principals.contains_key(&p) {
                    return Err(WorldError::UnknownPrincipal(p));
                }
                // The insider extracts everything held in software and can
                // act as the principal; hardware-held terms are usable in
                // place but never enter the attacker's knowledge.
                let leaked = self.leak(&p);
                self.attacker_knowledge.extend(&leaked);
                self.attacker_controls.insert(p);
            }
            Fault::CollusionOfSps(sps) => {
                for sp in &sps {
                    if !self.principals.contains_key(sp) {
                        return Err(WorldError::UnknownPrincipal(sp.clone()));
                    }
                }
                self.collusions.push(sps);
            }
        }
        Ok(())
    }

    pub fn clear_outage(&mut self, p: &PrincipalId) {
        if let Some(pr) = self.principals.get_mut(p) {
            pr.online = true;
        }
    }

    /// Attacker view for derivation queries: accumulated compromise material,
    /// passively observed payloads, and the public constants.
    pub fn attacker_view(&self) -> Knowledge {
        let mut k = self.attacker_knowledge.clone();
        k.extend(&self.observer);
        k.extend(&self.public);
        k
    }

    /// Every remote service principal a user must rely on (anything that is
    /// not the user, their devices, or an SP).
    pub fn remote_service_principals(&self) -> Vec<PrincipalId> {
        self.principals
            .values()
            .filter(|p| {
                matches!(
                    p.role,
                    Role::IdP
                        | Role::FederationOperator
                        | Role::SyncServer
                        | Role::MailProvider
                        | Role::BridgeIdP
                )
            })
            .map(|p| p.id.clone())
            .collect()
    }

    pub fn devices_of(&self, user: &PrincipalId) -> Vec<PrincipalId> {
        self.principals
            .values()
            .filter(|p| p.role == Role::Device && p.owner.as_ref() == Some(user))
            .map(|p| p.id.clone())
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_party_world() -> (World, PrincipalId, PrincipalId) {
        let mut w = World::new(7);
        let a = w.add_principal("a", Role::Device, None);
        let b = w.add_principal("b", Role::SP, None);
        (w, a, b)
    }

    #[test]
    fn confidential_send_leaves_observer_empty() {
        let (mut w, a, b) = two_party_world();
        let n = w.nonce(&a, "n");
        w.send(Channel::web(&a, &b), n.clone(), Annotation::None).unwrap();
        assert!(w.observer.is_empty());
        assert!(w.principal(&b).knowledge.contains(&n));
    }

    #[test]
    fn non_confidential_send_feeds_observer() {
        let (mut w, a, b) = two_party_world();
        let n = w.nonce(&a, "n");
        let mut ch = Channel::web(&a, &b);
        ch.confidential = false;
        w.send(ch, n.clone(), Annotation::None).unwrap();
        assert!(w.observer.contains(&n));
    }

    #[test]
    fn outage_fails_delivery_without_state_change() {
        let (mut w, a, b) = two_party_world();
        let n = w.nonce(&a, "n");
        w.inject(Fault::Outage(b.clone())).unwrap();
        let before = w.trace_len();
        let err = w.send(Channel::web(&a, &b), n.clone(), Annotation::None);
        assert!(matches!(err, Err(WorldError::DeliveryFailure(_))));
        assert_eq!(w.trace_len(), before);
        assert!(!w.principal(&b).knowledge.contains(&n));
    }

    #[test]
    fn redirect_device_learns_payload() {
        let mut w = World::new(0);
        let idp = w.add_principal("idp", Role::IdP, None);
        let sp = w.add_principal("sp", Role::SP, None);
        let user = w.add_principal("u", Role::User, None);
        let dev = w.add_principal("d", Role::Device, Some(&user));
        let n = w.nonce(&idp, "code");
        w.send(Channel::redirect(&idp, &sp, &dev), n.clone(), Annotation::AssertionIssued)
            .unwrap();
        assert!(w.principal(&dev).knowledge.contains(&n));
        assert!(w.principal(&sp).knowledge.contains(&n));
    }

    #[test]
    fn leak_excludes_hardware_held_terms() {
        let mut w = World::new(0);
        let d = w.add_principal("d", Role::Device, None);
        let (sk, pk) = w.key_pair(&d, "devkey", false);
        let soft = w.sym_key(&d, "softkey", true);
        w.put(&d, "privkey", sk.clone(), Scope::Server);
        w.put(&d, "pubkey", pk.clone(), Scope::Server);
        w.put(&d, "softkey", soft.clone(), Scope::Server);
        let leaked = w.leak(&d);
        assert!(!leaked.contains(&sk));
        assert!(leaked.contains(&pk), "public halves are not secret");
        assert!(leaked.contains(&soft));
    }

    #[test]
    fn leak_of_fresh_principal_is_empty() {
        let (w, a, _) = two_party_world();
        assert!(w.leak(&a).is_empty());
        assert!(w.observe(&a).is_empty());
    }

    #[test]
    fn insider_sees_traffic_through_controlled_principal() {
        let (mut w, a, b) = two_party_world();
        w.inject(Fault::MaliciousInsider(b.clone())).unwrap();
        let n = w.nonce(&a, "n");
        w.send(Channel::web(&a, &b), n.clone(), Annotation::None).unwrap();
        assert!(w.attacker_knowledge.contains(&n));
    }

    #[test]
    fn same_seed_same_ids() {
        let mk = |seed| {
            let mut w = World::new(seed);
            let a = w.add_principal("a", Role::Device, None);
            (w.nonce(&a, "x"), w.nonce(&a, "x"))
        };
        assert_eq!(mk(3), mk(3));
        assert_ne!(mk(3), mk(4));
    }
}
