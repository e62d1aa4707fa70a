//! Shibboleth (SAML) driver.
//!
//! Federated association: IdPs and SPs register with a federation operator
//! rather than with each other, discovery picks the user's IdP from the
//! member list, and the SP validates the POSTed response over a back channel.
//! Pairwise pseudonymous identifiers and the discovery service are optional
//! protocol features, both on by default.

use crate::terms::{SecretClass, SecretId, Term};
use crate::world::{Annotation, Channel, PrincipalId, Role, Scope};

use super::helpers::*;
use super::*;

pub struct Shibboleth;

fn signing_key_name(idp: &PrincipalId) -> String {
    format!("idpkey.{idp}")
}

impl Shibboleth {
    fn subject_id(&self, run: &Run, user: &PrincipalId, sp: &PrincipalId) -> Term {
        let idp = &run.dep.home_idp;
        if run.dep.feature_flag("pairwise-ids", true) {
            run.world
                .store_term(idp, &format!("pairwise:{user}:{sp}"))
                .cloned()
                .expect("pairwise id provisioned at deploy")
        } else {
            Term::atom(format!("{user}@{idp}"))
        }
    }
}

impl SchemeDriver for Shibboleth {
    fn name(&self) -> SchemeName {
        SchemeName::Shibboleth
    }

    fn descriptor(&self) -> SchemeDescriptor {
        SchemeDescriptor {
            name: self.name(),
            coords: Coords {
                association: Association::A3,
                conveyance: Conveyance::G1,
                verification: Verification::C1,
                auth_type: AuthType::T1a,
                multi_device: MultiDevice::M1,
            },
            optional_features: vec![
                OptionalFeature {
                    key: "discovery-service",
                    default: FeatureValue::Flag(true),
                    affects: Some(crate::evaluator::Benefit::B6),
                },
                OptionalFeature {
                    key: "pairwise-ids",
                    default: FeatureValue::Flag(true),
                    affects: Some(crate::evaluator::Benefit::B13),
                },
            ],
        }
    }

    fn deploy(&self, cfg: &DeployConfig) -> Result<Run, SchemeError> {
        if cfg.idps == 0 || cfg.sps == 0 {
            return Err(SchemeError::InvalidConfig("need at least one IdP and one SP".into()));
        }
        let (mut w, mut dep) = base_world(cfg, self.name());
        let fedop = w.add_principal("federation", Role::FederationOperator, None);
        dep.operator = Some(fedop.clone());
        let (fed_sk, fed_pk) = w.key_pair(&fedop.clone(), "fedkey", true);
        w.put(&fedop, "signing-key", fed_sk.clone(), Scope::Server);
        w.make_public(fed_pk);

        for i in 1..=cfg.idps {
            let idp = w.add_principal(&format!("idp{i}"), Role::IdP, None);
            let (sk, pk) = w.key_pair(&idp.clone(), &signing_key_name(&idp), true);
            w.put(&idp, "signing-key", sk, Scope::Server);
            w.make_public(pk.clone());
            // Joining the federation: metadata submission, vetting record,
            // and an operator-signed membership certificate.
            let _ = w.send(
                Channel::web(&idp, &fedop),
                Term::pair(Term::atom("federation-join"), pk.clone()),
                Annotation::ManualRegistration,
            );
            let vet = Term::sign(fed_sk.clone(), Term::pair(Term::atom(idp.as_str()), pk));
            w.put(&fedop, &format!("vetted:{idp}"), vet.clone(), Scope::Server);
            let _ = w.send(Channel::web(&fedop, &idp), vet, Annotation::None);
            dep.idps.push(idp);
        }
        dep.home_idp = dep.idps[0].clone();

        let user = dep.user.clone();
        let idp = dep.home_idp.clone();
        let pw = w.weak_secret(&user, &format!("pw.{user}.{idp}"));
        w.put(&idp, &format!("pwhash:{user}"), Term::hash(pw.clone()), Scope::User(user.clone()));
        w.put(&user, "password", pw, Scope::User(user.clone()));
        w.put(
            &idp,
            &format!("profile:{user}"),
            Term::pair(Term::atom("attributes"), Term::atom(format!("attrs.{user}"))),
            Scope::User(user.clone()),
        );

        let pairwise = dep.features.flag("pairwise-ids", true);
        for sp in dep.sps.clone() {
            let uid = if pairwise {
                let n = w.nonce(&idp.clone(), &format!("pairwise.{user}.{sp}"));
                w.put(&idp, &format!("pairwise:{user}:{sp}"), n.clone(), Scope::User(user.clone()));
                n
            } else {
                Term::atom(format!("{user}@{idp}"))
            };
            w.put(&sp, &format!("account:{user}"), uid.clone(), Scope::User(user.clone()));
            put_account_ids(&mut w, &sp, &user, uid);
        }
        Ok(Run { world: w, dep })
    }

    fn register_sp(&self, run: &mut Run, sp: &PrincipalId) -> Vec<TraceEvent> {
        let start = run.world.step();
        let fedop = run.dep.operator.clone().expect("deployed");
        if run.dep.feature_flag("discovery-service", true) {
            // One registration with the federation covers every member IdP.
            let _ = run.world.send(
                Channel::web(sp, &fedop),
                Term::pair(Term::atom("federation-join"), Term::atom(sp.as_str())),
                Annotation::ManualRegistration,
            );
            run.world.put(&fedop, &format!("member:{sp}"), Term::atom(sp.as_str()), Scope::Server);
        } else {
            // Without discovery, metadata is exchanged with each IdP by hand.
            for idp in run.dep.idps.clone() {
                let _ = run.world.send(
                    Channel::web(sp, &idp),
                    Term::pair(Term::atom("metadata-exchange"), Term::atom(sp.as_str())),
                    Annotation::ManualRegistration,
                );
            }
        }
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
        let idp = run.dep.home_idp.clone();
        let fedop = run.dep.operator.clone().expect("deployed");
        if run
            .dep
            .blocked_authority
            .as_deref()
            .is_some_and(|b| b == idp.as_str())
        {
            return AuthOutcome::failure(FailureReason::IdpFiltered, run.trace_from(start));
        }

        let pw = run.world.store_term(user, "password").cloned().expect("deployed");
        let uid = self.subject_id(run, user, sp);
        let discovery = run.dep.feature_flag("discovery-service", true);

        let result = || -> Result<Term, crate::world::WorldError> {
            let w = &mut run.world;
            w.send(Channel::web(user, device), Term::atom("login"), Annotation::UserAction)?;
            w.send(Channel::web(device, sp), Term::atom("login"), Annotation::None)?;
            if discovery {
                // Discovery service: the user picks their IdP from the
                // federation's member list.
                w.send(
                    Channel::web(sp, &fedop),
                    Term::atom("discovery-request"),
                    Annotation::None,
                )?;
                w.send(
                    Channel::web(&fedop, device),
                    Term::pair(Term::atom("idp-list"), Term::atom(idp.as_str())),
                    Annotation::None,
                )?;
            }
            w.send(Channel::web(user, device), Term::atom(idp.as_str()), Annotation::IdPSelected)?;
            w.send(
                Channel::redirect(sp, &idp, device),
                Term::pair(Term::atom("authn-request"), Term::atom(sp.as_str())),
                Annotation::None,
            )?;
            w.send(Channel::web(user, device), pw.clone(), Annotation::UserAction)?;
            w.put(device, "input:password", pw.clone(), Scope::User(user.clone()));
            w.send(Channel::web(device, &idp), pw.clone(), Annotation::None)?;

            // Signed response POSTed back through the browser, carrying the
            // signalled assurance level.
            let sk = w.store_term(&idp, "signing-key").cloned().unwrap();
            let n = w.nonce(&idp, "saml");
            let assertion = Term::sign(
                sk,
                Term::list(&[
                    uid.clone(),
                    Term::atom(sp.as_str()),
                    Term::pair(Term::atom("loa"), Term::atom("loa1")),
                    n,
                ]),
            );
            w.send(Channel::redirect(&idp, sp, device), assertion.clone(), Annotation::AssertionIssued)?;
            w.send(Channel::redirect(&idp, sp, device), Term::atom("loa1"), Annotation::LoASignalled)?;

            // Stateful validation: resolve the assertion with the IdP.
            w.send(Channel::backchannel(sp, &idp), assertion.clone(), Annotation::IdPQueried)?;
            w.send(Channel::backchannel(&idp, sp), Term::atom("assertion-valid"), Annotation::None)?;
            let attrs = w.store_term(&idp, &format!("profile:{user}")).cloned().unwrap();
            w.send(Channel::backchannel(&idp, sp), attrs, Annotation::ProfileDataShared)?;
            Ok(assertion)
        }();

        match result {
            Ok(assertion) => {
                run.world
                    .put(sp, &format!("accepted:{user}"), assertion, Scope::User(user.clone()));
                let session = create_session(&mut run.world, sp, user, uid, device);
                AuthOutcome::success(session, run.trace_from(start))
            }
            Err(_) => AuthOutcome::failure(FailureReason::OutagePath, run.trace_from(start)),
        }
    }

    fn switch_idp(&self, run: &mut Run) -> Result<SwitchOutcome, SchemeError> {
        if run.dep.idps.len() < 2 {
            return Err(SchemeError::SwitchImpossible("no second IdP deployed".into()));
        }
        let start = run.world.step();
        run.dep.mark_phase(&run.world, Phase::SwitchIdp);
        let user = run.dep.user.clone();
        let new_idp = run.dep.idps[1].clone();
        let pw = run.world.weak_secret(&user, &format!("pw.{user}.{new_idp}"));
        run.world.put(
            &new_idp,
            &format!("pwhash:{user}"),
            Term::hash(pw.clone()),
            Scope::User(user.clone()),
        );
        run.world.put(&user, "password", pw, Scope::User(user.clone()));

        let mut updates = 0;
        for sp in run.dep.sps.clone() {
            let uid = Term::atom(format!("{user}@{new_idp}"));
            let dev = run.dep.primary_device().clone();
            let _ = run.world.send(Channel::web(&user, &dev), uid.clone(), Annotation::UserAction);
            let _ = run.world.send(Channel::web(&dev, &sp), uid.clone(), Annotation::UserAction);
            run.world.put(&sp, &format!("account:{user}"), uid.clone(), Scope::User(user.clone()));
            put_account_ids(&mut run.world, &sp, &user, uid);
            updates += 1;
        }
        run.dep.home_idp = new_idp;
        Ok(SwitchOutcome {
            per_sp_updates: updates,
            intra_federation: false,
            interim_forwarding: false,
            trace: run.trace_from(start),
        })
    }

    fn acceptance(&self, run: &Run, victim: &PrincipalId, sp: &PrincipalId) -> AcceptanceSpec {
        let idp = run.dep.home_idp.clone();
        let sk = run.world.store_term(&idp, "signing-key").cloned().expect("deployed");
        let uid = self.subject_id(run, victim, sp);
        let pw = run.world.store_term(victim, "password").cloned().expect("deployed");
        let fresh = Term::Nonce(SecretId::new("atk.nonce"));
        let assertion = Term::sign(
            sk,
            Term::list(&[
                uid,
                Term::atom(sp.as_str()),
                Term::pair(Term::atom("loa"), Term::atom("loa1")),
                fresh.clone(),
            ]),
        );
        AcceptanceSpec {
            routes: vec![Route {
                label: "present a federation-signed response for the victim",
                requires: vec![Requirement::Derive(assertion.clone())],
                emits: vec![],
            }],
            oracles: vec![Oracle {
                id: "idp-login",
                issuer: idp,
                needs: vec![pw],
                yields: vec![assertion],
                emits: vec![],
            }],
            attacker_seed: vec![fresh.clone()],
            fresh_classes: vec![(fresh, SecretClass::strong())],
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn federation_registration_is_single_event() {
        let mut r = Shibboleth.deploy(&DeployConfig::default()).unwrap();
        let sp = r.dep.sps[0].clone();
        let trace = Shibboleth.register_sp(&mut r, &sp);
        assert_eq!(Run::count_annotation(&trace, Annotation::ManualRegistration), 1);
        let fedop = r.dep.operator.clone().unwrap();
        assert_eq!(trace[0].channel.to, fedop);
    }

    #[test]
    fn without_discovery_registration_is_per_idp() {
        let mut cfg = DeployConfig::default();
        cfg.features.set("discovery-service", FeatureValue::Flag(false));
        let mut r = Shibboleth.deploy(&cfg).unwrap();
        let sp = r.dep.sps[0].clone();
        let trace = Shibboleth.register_sp(&mut r, &sp);
        assert_eq!(Run::count_annotation(&trace, Annotation::ManualRegistration), 2);
    }

    #[test]
    fn pairwise_ids_differ_across_sps() {
        let r = Shibboleth.deploy(&DeployConfig::default()).unwrap();
        let user = &r.dep.user;
        let id1 = r.world.store_term(&r.dep.sps[0], &format!("ids:{user}"));
        let id2 = r.world.store_term(&r.dep.sps[1], &format!("ids:{user}"));
        assert_ne!(id1, id2);
    }

    #[test]
    fn validation_queries_the_idp() {
        let mut r = Shibboleth.deploy(&DeployConfig::default()).unwrap();
        let (user, sp, dev) = (r.dep.user.clone(), r.dep.sps[0].clone(), r.dep.primary_device().clone());
        Shibboleth.register_sp(&mut r, &sp);
        let out = Shibboleth.authenticate(&mut r, &user, &sp, &dev);
        assert!(out.success);
        assert!(Run::count_annotation(&out.trace, Annotation::IdPQueried) >= 1);
        assert!(Run::count_annotation(&out.trace, Annotation::LoASignalled) >= 1);
    }
}
