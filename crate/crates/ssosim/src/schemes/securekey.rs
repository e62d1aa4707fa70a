//! SecureKey Concierge driver.
//!
//! A brokered federation with triple blinding: the SP never learns which
//! bank authenticated the user, the bank never learns which SP was visited,
//! and the broker itself only ever handles meaningless identifiers — the
//! bank-issued MBUN maps to an internal identifier (iPAI) which fans out to
//! one persistent anonymous identifier per SP (rpPAI).

use crate::terms::{SecretClass, SecretId, Term};
use crate::world::{Annotation, Channel, PrincipalId, Role, Scope};

use super::helpers::*;
use super::*;

pub struct SecureKey;

impl SchemeDriver for SecureKey {
    fn name(&self) -> SchemeName {
        SchemeName::SecureKey
    }

    fn descriptor(&self) -> SchemeDescriptor {
        SchemeDescriptor {
            name: self.name(),
            coords: Coords {
                association: Association::A4,
                conveyance: Conveyance::G1,
                verification: Verification::C1,
                auth_type: AuthType::T1a,
                multi_device: MultiDevice::M1,
            },
            optional_features: vec![],
        }
    }

    fn deploy(&self, cfg: &DeployConfig) -> Result<Run, SchemeError> {
        if cfg.idps == 0 || cfg.sps == 0 {
            return Err(SchemeError::InvalidConfig("need at least one IdP and one SP".into()));
        }
        let (mut w, mut dep) = base_world(cfg, self.name());
        let broker = w.add_principal("securekey", Role::FederationOperator, None);
        dep.operator = Some(broker.clone());
        let (broker_sk, broker_pk) = w.key_pair(&broker.clone(), "skkey", true);
        w.put(&broker, "signing-key", broker_sk.clone(), Scope::Server);
        w.make_public(broker_pk);

        for i in 1..=cfg.idps {
            let bank = w.add_principal(&format!("idp{i}"), Role::IdP, None);
            let (sk, pk) = w.key_pair(&bank.clone(), &format!("bankkey.{bank}"), true);
            w.put(&bank, "signing-key", sk, Scope::Server);
            w.make_public(pk.clone());
            // Approval of the institution by the broker.
            let _ = w.send(
                Channel::web(&bank, &broker),
                Term::pair(Term::atom("idp-approval"), pk.clone()),
                Annotation::ManualRegistration,
            );
            let vet = Term::sign(broker_sk.clone(), Term::pair(Term::atom(bank.as_str()), pk));
            w.put(&broker, &format!("vetted:{bank}"), vet.clone(), Scope::Server);
            let _ = w.send(Channel::web(&broker, &bank), vet, Annotation::None);
            dep.idps.push(bank);
        }
        dep.home_idp = dep.idps[0].clone();

        // Bank credentials; the bank knows the real customer, the broker
        // only ever sees the MBUN it mints for them.
        let user = dep.user.clone();
        let bank = dep.home_idp.clone();
        let pw = w.weak_secret(&user, &format!("pw.{user}.{bank}"));
        w.put(&bank, &format!("pwhash:{user}"), Term::hash(pw.clone()), Scope::User(user.clone()));
        w.put(&user, "password", pw, Scope::User(user.clone()));
        let mbun = w.nonce(&bank.clone(), &format!("mbun.{user}"));
        w.put(&bank, &format!("mbun:{user}"), mbun.clone(), Scope::User(user.clone()));

        let ipai = w.nonce(&broker.clone(), &format!("ipai.{user}"));
        w.put(&broker, &format!("mbun-map:{user}"), Term::pair(mbun, ipai.clone()), Scope::User(user.clone()));
        for sp in dep.sps.clone() {
            let rppai = w.nonce(&broker.clone(), &format!("rppai.{user}.{sp}"));
            w.put(
                &broker,
                &format!("rppai:{user}:{sp}"),
                Term::pair(ipai.clone(), rppai.clone()),
                Scope::User(user.clone()),
            );
            w.put(&sp, &format!("account:{user}"), rppai.clone(), Scope::User(user.clone()));
            put_account_ids(&mut w, &sp, &user, rppai);
        }
        Ok(Run { world: w, dep })
    }

    fn register_sp(&self, run: &mut Run, sp: &PrincipalId) -> Vec<TraceEvent> {
        let start = run.world.step();
        let broker = run.dep.operator.clone().expect("deployed");
        let _ = run.world.send(
            Channel::web(sp, &broker),
            Term::pair(Term::atom("federation-join"), Term::atom(sp.as_str())),
            Annotation::ManualRegistration,
        );
        run.world.put(&broker, &format!("member:{sp}"), Term::atom(sp.as_str()), Scope::Server);
        run.trace_from(start)
    }

    fn setup_device(&self, _run: &mut Run, _device: &PrincipalId) -> Result<Vec<TraceEvent>, SchemeError> {
        Ok(Vec::new())
    }

    fn authenticate(
        &self,
        run: &mut Run,
        user: &PrincipalId,
        sp: &PrincipalId,
        device: &PrincipalId,
    ) -> AuthOutcome {
        let start = run.world.step();
        let bank = run.dep.home_idp.clone();
        let broker = run.dep.operator.clone().expect("deployed");
        if run
            .dep
            .blocked_authority
            .as_deref()
            .is_some_and(|b| b == bank.as_str())
        {
            // SPs lodge their institution filter with the broker, which
            // enforces it on their behalf.
            return AuthOutcome::failure(FailureReason::IdpFiltered, run.trace_from(start));
        }

        let pw = run.world.store_term(user, "password").cloned().expect("deployed");
        let mbun = run.world.store_term(&bank, &format!("mbun:{user}")).cloned().expect("deployed");
        let rppai = run
            .world
            .store_term(sp, &format!("account:{user}"))
            .cloned()
            .expect("account");

        let result = || -> Result<Term, crate::world::WorldError> {
            let w = &mut run.world;
            w.send(Channel::web(user, device), Term::atom("concierge-login"), Annotation::UserAction)?;
            w.send(Channel::web(device, sp), Term::atom("concierge-login"), Annotation::None)?;
            // To the broker; the user picks their institution there, so the
            // SP never learns the choice.
            w.send(
                Channel::redirect(sp, &broker, device),
                Term::pair(Term::atom("auth-request"), Term::atom(sp.as_str())),
                Annotation::None,
            )?;
            w.send(
                Channel::web(&broker, device),
                Term::atom("institution-list"),
                Annotation::None,
            )?;
            w.send(Channel::web(user, device), Term::atom(bank.as_str()), Annotation::IdPSelected)?;
            w.send(Channel::web(device, &broker), Term::atom(bank.as_str()), Annotation::None)?;
            // On to the bank; the request names the broker, not the SP.
            w.send(
                Channel::redirect(&broker, &bank, device),
                Term::pair(Term::atom("auth-request"), Term::atom(broker.as_str())),
                Annotation::None,
            )?;
            w.send(Channel::web(user, device), pw.clone(), Annotation::UserAction)?;
            w.put(device, "input:password", pw.clone(), Scope::User(user.clone()));
            w.send(Channel::web(device, &bank), pw.clone(), Annotation::None)?;

            // Bank asserts the MBUN to the broker.
            let bank_sk = w.store_term(&bank, "signing-key").cloned().unwrap();
            let n1 = w.nonce(&bank, "bankassert");
            let bank_assertion =
                Term::sign(bank_sk, Term::list(&[mbun.clone(), Term::atom(broker.as_str()), n1]));
            w.send(
                Channel::redirect(&bank, &broker, device),
                bank_assertion,
                Annotation::AssertionIssued,
            )?;

            // Broker maps MBUN -> iPAI -> rpPAI and asserts to the SP.
            let broker_sk = w.store_term(&broker, "signing-key").cloned().unwrap();
            let n2 = w.nonce(&broker, "skassert");
            let assertion = Term::sign(
                broker_sk,
                Term::list(&[
                    rppai.clone(),
                    Term::atom(sp.as_str()),
                    Term::pair(Term::atom("loa"), Term::atom("loa2")),
                    n2,
                ]),
            );
            w.send(Channel::redirect(&broker, sp, device), assertion.clone(), Annotation::AssertionIssued)?;
            w.send(Channel::redirect(&broker, sp, device), Term::atom("loa2"), Annotation::LoASignalled)?;
            // Stateful validation with the broker.
            w.send(Channel::backchannel(sp, &broker), assertion.clone(), Annotation::IdPQueried)?;
            w.send(Channel::backchannel(&broker, sp), Term::atom("assertion-valid"), Annotation::None)?;
            Ok(assertion)
        }();

        match result {
            Ok(assertion) => {
                run.world
                    .put(sp, &format!("accepted:{user}"), assertion, Scope::User(user.clone()));
                let session = create_session(&mut run.world, sp, user, rppai, device);
                AuthOutcome::success(session, run.trace_from(start))
            }
            Err(_) => AuthOutcome::failure(FailureReason::OutagePath, run.trace_from(start)),
        }
    }

    fn switch_idp(&self, run: &mut Run) -> Result<SwitchOutcome, SchemeError> {
        if run.dep.idps.len() < 2 {
            return Err(SchemeError::SwitchImpossible("no second institution deployed".into()));
        }
        let start = run.world.step();
        run.dep.mark_phase(&run.world, Phase::SwitchIdp);
        let user = run.dep.user.clone();
        let broker = run.dep.operator.clone().expect("deployed");
        let new_bank = run.dep.idps[1].clone();

        // New institution, new MBUN; the broker re-points the mapping at the
        // same iPAI, so every rpPAI — and every SP account — stays put.
        let pw = run.world.weak_secret(&user, &format!("pw.{user}.{new_bank}"));
        run.world.put(
            &new_bank,
            &format!("pwhash:{user}"),
            Term::hash(pw.clone()),
            Scope::User(user.clone()),
        );
        run.world.put(&user, "password", pw, Scope::User(user.clone()));
        let new_mbun = run.world.nonce(&new_bank.clone(), &format!("mbun.{user}"));
        run.world
            .put(&new_bank, &format!("mbun:{user}"), new_mbun.clone(), Scope::User(user.clone()));
        let ipai = match run.world.store_term(&broker, &format!("mbun-map:{user}")) {
            Some(Term::Pair(_, ipai)) => (**ipai).clone(),
            _ => unreachable!("deployed"),
        };
        let dev = run.dep.primary_device().clone();
        let _ = run.world.send(
            Channel::web(&dev, &broker),
            Term::pair(Term::atom("remap-request"), new_mbun.clone()),
            Annotation::UserAction,
        );
        run.world.put(
            &broker,
            &format!("mbun-map:{user}"),
            Term::pair(new_mbun, ipai),
            Scope::User(user.clone()),
        );
        run.dep.home_idp = new_bank;
        Ok(SwitchOutcome {
            per_sp_updates: 0,
            intra_federation: true,
            interim_forwarding: false,
            trace: run.trace_from(start),
        })
    }

    fn acceptance(&self, run: &Run, victim: &PrincipalId, sp: &PrincipalId) -> AcceptanceSpec {
        let bank = run.dep.home_idp.clone();
        let broker = run.dep.operator.clone().expect("deployed");
        let broker_sk = run.world.store_term(&broker, "signing-key").cloned().expect("deployed");
        let bank_sk = run.world.store_term(&bank, "signing-key").cloned().expect("deployed");
        let mbun = run
            .world
            .store_term(&bank, &format!("mbun:{victim}"))
            .cloned()
            .expect("deployed");
        let rppai = run
            .world
            .store_term(sp, &format!("account:{victim}"))
            .cloned()
            .expect("account");
        let pw = run.world.store_term(victim, "password").cloned().expect("deployed");

        let n1 = Term::Nonce(SecretId::new("atk.bankassert"));
        let n2 = Term::Nonce(SecretId::new("atk.skassert"));
        let bank_assertion =
            Term::sign(bank_sk, Term::list(&[mbun, Term::atom(broker.as_str()), n1.clone()]));
        let assertion = Term::sign(
            broker_sk,
            Term::list(&[
                rppai,
                Term::atom(sp.as_str()),
                Term::pair(Term::atom("loa"), Term::atom("loa2")),
                n2.clone(),
            ]),
        );

        AcceptanceSpec {
            routes: vec![Route {
                label: "present a broker-signed rpPAI assertion",
                requires: vec![Requirement::Derive(assertion.clone())],
                emits: vec![],
            }],
            oracles: vec![
                // The bank asserts the MBUN to whoever logs in as the victim.
                Oracle {
                    id: "bank-login",
                    issuer: bank,
                    needs: vec![pw],
                    yields: vec![bank_assertion.clone()],
                    emits: vec![],
                },
                // The broker converts any valid bank assertion.
                Oracle {
                    id: "broker-translate",
                    issuer: broker,
                    needs: vec![bank_assertion],
                    yields: vec![assertion],
                    emits: vec![],
                },
            ],
            attacker_seed: vec![n1.clone(), n2.clone()],
            fresh_classes: vec![
                (n1, SecretClass::strong()),
                (n2, SecretClass::strong()),
            ],
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn authed_run() -> Run {
        let mut r = SecureKey.deploy(&DeployConfig::default()).unwrap();
        let (user, dev) = (r.dep.user.clone(), r.dep.primary_device().clone());
        for sp in r.dep.sps.clone() {
            SecureKey.register_sp(&mut r, &sp);
            assert!(SecureKey.authenticate(&mut r, &user, &sp, &dev).success);
        }
        r
    }

    #[test]
    fn deploy_creates_the_broker() {
        let r = SecureKey.deploy(&DeployConfig::default()).unwrap();
        let broker = r.dep.operator.clone().unwrap();
        assert_eq!(r.world.principal(&broker).role, Role::FederationOperator);
    }

    #[test]
    fn per_sp_identifiers_differ() {
        let r = authed_run();
        let user = &r.dep.user;
        let a = r.world.store_term(&r.dep.sps[0], &format!("account:{user}"));
        let b = r.world.store_term(&r.dep.sps[1], &format!("account:{user}"));
        assert_ne!(a, b, "rpPAI must be SP-specific");
    }

    #[test]
    fn triple_blinding_holds() {
        let r = authed_run();
        let user = &r.dep.user;
        let bank = &r.dep.home_idp;
        let broker = r.dep.operator.clone().unwrap();
        // Bank never sees an SP identifier.
        let bank_view = r.world.observe(bank);
        for sp in &r.dep.sps {
            assert!(!bank_view.iter().any(|t| t.mentions_atom(sp.as_str())));
        }
        // SP never sees the bank identifier.
        let sp_view = r.world.observe(&r.dep.sps[0]);
        assert!(!sp_view.iter().any(|t| t.mentions_atom(bank.as_str())));
        // Broker never sees the real user identity atom.
        let broker_view = r.world.observe(&broker);
        assert!(!broker_view.iter().any(|t| t.mentions_atom(user.as_str())));
    }

    #[test]
    fn intra_federation_switch_keeps_sp_accounts() {
        let mut r = authed_run();
        let user = r.dep.user.clone();
        let before: Vec<_> = r
            .dep
            .sps
            .iter()
            .map(|sp| r.world.store_term(sp, &format!("account:{user}")).cloned())
            .collect();
        let out = SecureKey.switch_idp(&mut r).unwrap();
        assert_eq!(out.per_sp_updates, 0);
        assert!(out.intra_federation);
        let after: Vec<_> = r
            .dep
            .sps
            .iter()
            .map(|sp| r.world.store_term(sp, &format!("account:{user}")).cloned())
            .collect();
        assert_eq!(before, after);
    }
}
