"""
Adversarial attacks on steering regressors.

Runners are registered in the DI container as `attack.<id>` factories taking
a `config` keyword.
"""
from steerguard.attacks.advgan import (AdvGanRunner, AdvGanUniRunner, Discriminator,
                                       Generator, advgan_generate, load_generator,
                                       save_generator, train_advgan)
from steerguard.attacks.base import (ALL_ATTACKS, TRANSFERABLE_ATTACKS, UNIVERSAL_ATTACKS,
                                     AdversarialExample, AttackConfig, AttackId,
                                     AttackRunner, is_success, make_example)
from steerguard.attacks.fgsm import ItFgsmRunner, it_fgsm
from steerguard.attacks.optimization import OptRunner, minimize_perturbation, opt_attack
from steerguard.attacks.universal import (OptUniRunner, UniversalPerturbation,
                                          apply_universal, craft_universal,
                                          load_perturbation, save_perturbation)
from steerguard.container import get_container

RUNNERS = {
    AttackId.IT_FGSM: ItFgsmRunner,
    AttackId.OPT: OptRunner,
    AttackId.OPT_UNI: OptUniRunner,
    AttackId.ADVGAN: AdvGanRunner,
    AttackId.ADVGAN_UNI: AdvGanUniRunner,
}


def register_attack_runners(container=None):
    container = container or get_container()
    for attack_id, runner_class in RUNNERS.items():
        container.register(f'attack.{attack_id.value}', runner_class, singleton=False)
    return container


def get_attack_runner(attack_id, config: AttackConfig = None) -> AttackRunner:
    """Fresh runner for `attack_id` (string or AttackId)"""
    attack_id = AttackId.parse(attack_id)
    container = get_container()
    name = f'attack.{attack_id.value}'
    if not container.has(name):
        register_attack_runners(container)
    return container.get(name, config=config)


__all__ = [
    'ALL_ATTACKS',
    'RUNNERS',
    'TRANSFERABLE_ATTACKS',
    'UNIVERSAL_ATTACKS',
    'AdvGanRunner',
    'AdvGanUniRunner',
    'AdversarialExample',
    'AttackConfig',
    'AttackId',
    'AttackRunner',
    'Discriminator',
    'Generator',
    'ItFgsmRunner',
    'OptRunner',
    'OptUniRunner',
    'UniversalPerturbation',
    'advgan_generate',
    'apply_universal',
    'craft_universal',
    'get_attack_runner',
    'is_success',
    'it_fgsm',
    'load_generator',
    'load_perturbation',
    'make_example',
    'minimize_perturbation',
    'opt_attack',
    'register_attack_runners',
    'save_generator',
    'save_perturbation',
    'train_advgan',
]
