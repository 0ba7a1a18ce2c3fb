"""Create run ledger tables

Revision ID: 3f1a9c2e7b10
Revises:
Create Date: 2026-10-18 09:12:40.118204

"""
from alembic import op
import sqlalchemy as sa


# revision identifiers, used by Alembic.
revision = '3f1a9c2e7b10'
down_revision = None
branch_labels = None
depends_on = None


def upgrade():
    op.create_table('simulation_run',
    sa.Column('id', sa.Integer(), nullable=False),
    sa.Column('kind', sa.String(length=16), nullable=False),
    sa.Column('scenario', sa.String(length=64), nullable=True),
    sa.Column('config_hash', sa.String(length=64), nullable=True),
    sa.Column('seed', sa.BigInteger(), nullable=True),
    sa.Column('preset', sa.String(length=32), nullable=True),
    sa.Column('status', sa.String(length=16), nullable=False),
    sa.Column('exit_code', sa.Integer(), nullable=True),
    sa.Column('out_dir', sa.Text(), nullable=True),
    sa.Column('wall_clock_seconds', sa.Float(), nullable=True),
    sa.Column('started_at', sa.DateTime(timezone=True), nullable=False),
    sa.Column('completed_at', sa.DateTime(timezone=True), nullable=True),
    sa.Column('summary_json', sa.Text(), nullable=True),
    sa.PrimaryKeyConstraint('id')
    )
    with op.batch_alter_table('simulation_run', schema=None) as batch_op:
        batch_op.create_index(batch_op.f('ix_simulation_run_kind'), ['kind'], unique=False)
        batch_op.create_index(batch_op.f('ix_simulation_run_config_hash'), ['config_hash'], unique=False)

    op.create_table('check_record',
    sa.Column('id', sa.Integer(), nullable=False),
    sa.Column('run_id', sa.Integer(), nullable=False),
    sa.Column('check_id', sa.String(length=64), nullable=False),
    sa.Column('status', sa.String(length=16), nullable=False),
    sa.Column('measured_json', sa.Text(), nullable=True),
    sa.Column('tolerances_json', sa.Text(), nullable=True),
    sa.Column('seed', sa.BigInteger(), nullable=True),
    sa.Column('occurred_at', sa.DateTime(timezone=True), nullable=False),
    sa.ForeignKeyConstraint(['run_id'], ['simulation_run.id'], ),
    sa.PrimaryKeyConstraint('id')
    )
    with op.batch_alter_table('check_record', schema=None) as batch_op:
        batch_op.create_index(batch_op.f('ix_check_record_run_id'), ['run_id'], unique=False)
        batch_op.create_index(batch_op.f('ix_check_record_check_id'), ['check_id'], unique=False)

    op.create_table('run_error',
    sa.Column('id', sa.Integer(), nullable=False),
    sa.Column('run_id', sa.Integer(), nullable=False),
    sa.Column('error_type', sa.String(length=64), nullable=False),
    sa.Column('error_message', sa.Text(), nullable=False),
    sa.Column('stack_trace', sa.Text(), nullable=True),
    sa.Column('occurred_at', sa.DateTime(timezone=True), nullable=False),
    sa.ForeignKeyConstraint(['run_id'], ['simulation_run.id'], ),
    sa.PrimaryKeyConstraint('id')
    )
    with op.batch_alter_table('run_error', schema=None) as batch_op:
        batch_op.create_index(batch_op.f('ix_run_error_run_id'), ['run_id'], unique=False)


def downgrade():
    with op.batch_alter_table('run_error', schema=None) as batch_op:
        batch_op.drop_index(batch_op.f('ix_run_error_run_id'))
    op.drop_table('run_error')

    with op.batch_alter_table('check_record', schema=None) as batch_op:
        batch_op.drop_index(batch_op.f('ix_check_record_check_id'))
        batch_op.drop_index(batch_op.f('ix_check_record_run_id'))
    op.drop_table('check_record')

    with op.batch_alter_table('simulation_run', schema=None) as batch_op:
        batch_op.drop_index(batch_op.f('ix_simulation_run_config_hash'))
        batch_op.drop_index(batch_op.f('ix_simulation_run_kind'))
    op.drop_table('simulation_run')
