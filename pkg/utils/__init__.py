"""
utils/__init__.py
──────────────────
基础设施：种子派生、分块、配置文件、样本容器、报告与进度显示
"""
